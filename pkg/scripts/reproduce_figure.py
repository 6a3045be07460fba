#!/usr/bin/env python3
"""Full-scale risk-vs-samples reproduction: d=1000, sigma=0.1, 50 trials.

Writes artifacts/figure_sweep_d1000.csv (plus .meta.json sidecar) on the
default grid, which is denser around n = d.  Budget roughly 15-60 minutes
depending on cores; pass --d 200 for a desk-scale run.
"""

import argparse
import pathlib
import sys

from ddlab.harness import SweepConfig, default_n_grid, run_sweep


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--d", type=int, default=1000)
    parser.add_argument("--trials", type=int, default=50)
    parser.add_argument("--sigma", type=float, default=0.1)
    parser.add_argument("--seed", type=int, default=1)
    parser.add_argument("--out", default=None, help="CSV path (default artifacts/...)")
    parser.add_argument("--threads", default="auto")
    args = parser.parse_args()

    if args.out is None:
        artifacts = pathlib.Path(__file__).resolve().parent.parent / "artifacts"
        artifacts.mkdir(exist_ok=True)
        args.out = str(artifacts / f"figure_sweep_d{args.d}.csv")

    cfg = SweepConfig(
        d=args.d,
        n_grid=tuple(default_n_grid(args.d)),
        trials=args.trials,
        base_seed=args.seed,
        output_path=args.out,
        sigma=args.sigma,
        threads=args.threads if args.threads == "auto" else int(args.threads),
    )
    rows = run_sweep(cfg)
    errored = [row.n for row in rows if row.error]
    print(f"wrote {args.out} ({len(rows)} rows)")
    if errored:
        print(f"rows with errors: {errored}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())

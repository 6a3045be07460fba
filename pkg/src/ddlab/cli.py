"""Command-line entry points.

Subcommands: ``sweep`` (risk vs. sample count), ``trace-growth`` (inverse-Gram
trace one sample at a time), ``conditioning`` (singular-value collapse demo),
``verify`` (exact-identity checks; nonzero exit on failure), and ``theory``
(closed-form curves, no sampling).  Flags can also be supplied through a
plain ``key=value`` file via ``--config``; explicit flags win.
"""

from __future__ import annotations

import argparse
import json
import sys
from typing import Optional, Sequence

from .harness import (
    SweepConfig,
    default_n_grid,
    run_conditioning_demo,
    run_sweep,
    run_theory_table,
    run_trace_growth,
    verify_identities,
)
from .randgen import BetaMode

_BETA_MODES = {mode.value: mode for mode in BetaMode}


def parse_n_grid(text: str) -> list[int]:
    """Comma-separated sample counts, e.g. ``10,50,100``."""
    try:
        grid = [int(part) for part in text.split(",") if part.strip()]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"bad --n-grid {text!r}: {exc}") from None
    if not grid:
        raise argparse.ArgumentTypeError("--n-grid must contain at least one integer")
    return grid


def parse_n_range(text: str) -> list[int]:
    """START:STOP:STEP sample range, STOP inclusive."""
    parts = text.split(":")
    if len(parts) != 3:
        raise argparse.ArgumentTypeError(f"bad --n-range {text!r}: expected START:STOP:STEP")
    try:
        start, stop, step = (int(p) for p in parts)
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"bad --n-range {text!r}: {exc}") from None
    if step < 1:
        raise argparse.ArgumentTypeError("--n-range STEP must be >= 1")
    return list(range(start, stop + 1, step))


def parse_threads(text: str):
    if text == "auto":
        return "auto"
    try:
        return int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"--threads must be an integer or 'auto', got {text!r}")


def load_config_file(path: str) -> dict:
    """Plain key=value file; blank lines and ``#`` comments are ignored."""
    values = {}
    with open(path) as handle:
        for lineno, raw in enumerate(handle, 1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ValueError(f"{path}:{lineno}: expected key=value, got {raw.rstrip()!r}")
            key, value = (part.strip() for part in line.split("=", 1))
            values[key.replace("-", "_")] = value
    return values


def _add_common_flags(sub: argparse.ArgumentParser) -> None:
    sub.add_argument("--config", metavar="PATH", help="key=value defaults file")
    sub.add_argument("--d", type=int, default=200, help="ambient dimension (default 200)")
    sub.add_argument("--sigma", type=float, default=0.1, help="noise standard deviation")
    sub.add_argument("--beta-norm", type=float, default=1.0, help="ground-truth norm")
    sub.add_argument(
        "--beta-mode",
        choices=sorted(_BETA_MODES),
        default=BetaMode.FIRST_AXIS.value,
        help="ground-truth direction rule",
    )
    sub.add_argument("--trials", type=int, default=50, help="Monte Carlo trials")
    sub.add_argument("--seed", type=int, default=1, help="base seed")
    sub.add_argument("--out", metavar="PATH", help="output file")
    sub.add_argument("--threads", type=parse_threads, default="auto", help="N or 'auto'")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="ddlab",
        description="Sample-wise double-descent experiments for ridgeless regression.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    sweep = sub.add_parser("sweep", help="Monte Carlo risk over a sample-count grid")
    _add_common_flags(sweep)
    sweep.add_argument("--n-grid", type=parse_n_grid, help="comma list of sample counts")
    sweep.add_argument("--n-range", type=parse_n_range, help="START:STOP:STEP sample range")

    growth = sub.add_parser("trace-growth", help="inverse-Gram trace, one sample at a time")
    _add_common_flags(growth)
    growth.add_argument("--n-max", type=int, help="largest sample count (default d - 1)")

    cond = sub.add_parser("conditioning", help="singular-value collapse demonstration")
    _add_common_flags(cond)

    verify = sub.add_parser("verify", help="exact-identity checks; nonzero exit on failure")
    _add_common_flags(verify)
    verify.add_argument("--cases", type=int, default=1000, help="random instances to check")

    theory = sub.add_parser("theory", help="closed-form risk curves, no sampling")
    _add_common_flags(theory)

    return parser


# Converters for config-file values, keyed by argparse destination.
_CONFIG_CONVERTERS = {
    "d": int,
    "sigma": float,
    "beta_norm": float,
    "beta_mode": str,
    "trials": int,
    "seed": int,
    "out": str,
    "threads": parse_threads,
    "n_grid": parse_n_grid,
    "n_range": parse_n_range,
    "n_max": int,
    "cases": int,
}


def _merge_config_file(args: argparse.Namespace, argv: Sequence[str]) -> argparse.Namespace:
    """Apply --config file values for flags not given explicitly on the line."""
    if not getattr(args, "config", None):
        return args
    file_values = load_config_file(args.config)
    explicit = {
        token[2:].split("=", 1)[0].replace("-", "_")
        for token in argv
        if token.startswith("--")
    }
    for key, raw in file_values.items():
        if key not in _CONFIG_CONVERTERS:
            raise ValueError(f"unknown config key {key!r} in {args.config}")
        if key in explicit or not hasattr(args, key):
            continue  # explicit flags win; keys for other subcommands are ignored
        setattr(args, key, _CONFIG_CONVERTERS[key](raw))
    return args


def _resolve_sweep_grid(args) -> list[int]:
    grid = []
    if args.n_grid:
        grid.extend(args.n_grid)
    if args.n_range:
        grid.extend(args.n_range)
    if not grid:
        return default_n_grid(args.d)
    return sorted(set(grid))


def _cmd_sweep(args) -> int:
    if not args.out:
        print("sweep requires --out PATH", file=sys.stderr)
        return 2
    cfg = SweepConfig(
        d=args.d,
        n_grid=tuple(_resolve_sweep_grid(args)),
        trials=args.trials,
        base_seed=args.seed,
        output_path=args.out,
        sigma=args.sigma,
        beta_norm=args.beta_norm,
        beta_mode=_BETA_MODES[args.beta_mode],
        threads=args.threads,
    )
    rows = run_sweep(cfg)
    bad = [row for row in rows if row.error and not row.error.startswith("skipped=")]
    for row in rows:
        marker = f"  [{row.error}]" if row.error else ""
        median = f"{row.summary.excess_median:.6g}" if row.summary else "-"
        print(f"n={row.n:>6d}  gamma={row.gamma:<8.4g} excess_median={median}{marker}")
    print(f"wrote {args.out} ({len(rows)} rows)")
    return 1 if bad else 0


def _cmd_trace_growth(args) -> int:
    if not args.out:
        print("trace-growth requires --out PATH", file=sys.stderr)
        return 2
    n_max = args.n_max if args.n_max is not None else args.d - 1
    rows = run_trace_growth(
        d=args.d,
        n_max=n_max,
        trials=args.trials,
        base_seed=args.seed,
        output_path=args.out,
        threads=args.threads,
    )
    flagged = sum(1 for row in rows if row.error)
    print(f"wrote {args.out} ({len(rows)} rows, {flagged} flagged)")
    return 0


def _cmd_conditioning(args) -> int:
    report = run_conditioning_demo(args.d, args.seed)
    payload = report.as_dict()
    if args.out:
        with open(args.out, "w") as handle:
            json.dump(payload, handle, indent=2, sort_keys=True)
            handle.write("\n")
        print(f"wrote {args.out}")
    print(f"pre-matrix nonzero singular values all equal d: {report.pre_all_equal_d}")
    print(f"sigma_min after one Gaussian row: {report.sigma_min_after:.6g}")
    print(f"witness bound d|g2|/sqrt(||g1||^2+d^2): {report.bound:.6g}")
    print(f"bound holds: {report.bound_holds}")
    print(
        f"fresh Gaussian n=d/10: median sigma_min^2/d = {report.gaussian_ratio_median:.4g}"
    )
    return 0


def _cmd_verify(args) -> int:
    report = verify_identities(args.cases, args.seed)
    if args.out:
        with open(args.out, "w") as handle:
            json.dump(report.as_dict(), handle, indent=2, sort_keys=True)
            handle.write("\n")
    print(
        f"trace update: {report.trace_checks} checks, {report.trace_failures} failures, "
        f"worst rel err {report.trace_worst_rel_err:.3e}"
    )
    print(
        f"signal/noise split: {report.split_checks} checks, {report.split_failures} failures, "
        f"worst err {report.split_worst_err:.3e}"
    )
    print(
        f"gd vs pseudoinverse: {report.gd_checks} checks, {report.gd_failures} failures, "
        f"worst rel gap {report.gd_worst_rel_gap:.3e}"
    )
    print(
        f"bias two-route check: diff {report.bias_var_diff:.3e} "
        f"(tolerance {report.bias_var_tol:.3e}) -> {'ok' if report.bias_var_pass else 'FAIL'}"
    )
    print("PASS" if report.passed else f"FAIL ({report.failures} failures)")
    return 0 if report.passed else 1


def _cmd_theory(args) -> int:
    if not args.out:
        print("theory requires --out PATH", file=sys.stderr)
        return 2
    rows = run_theory_table(args.d, args.sigma, args.beta_norm, default_n_grid(args.d), args.out)
    print(f"wrote {args.out} ({len(rows)} rows)")
    return 0


def main(argv: Optional[Sequence[str]] = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    args = _merge_config_file(parser.parse_args(argv), argv)
    handlers = {
        "sweep": _cmd_sweep,
        "trace-growth": _cmd_trace_growth,
        "conditioning": _cmd_conditioning,
        "verify": _cmd_verify,
        "theory": _cmd_theory,
    }
    return handlers[args.command](args)


if __name__ == "__main__":
    sys.exit(main())

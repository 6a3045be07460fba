"""The ``plotview render`` command."""

from __future__ import annotations

import argparse
import sys
from typing import Optional, Sequence

from .render import PlotJob, PlotKind, SchemaError, YScale, render


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="plotview",
        description="Render experiment CSVs into figure-style images.",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    cmd = sub.add_parser("render", help="render one CSV to one image")
    cmd.add_argument("--in", dest="input_csv", required=True, metavar="PATH")
    cmd.add_argument("--out", dest="output_image", required=True, metavar="PATH")
    cmd.add_argument(
        "--kind",
        choices=[k.value for k in PlotKind],
        required=True,
        help="which harness CSV layout the input follows",
    )
    cmd.add_argument(
        "--yscale",
        choices=[s.value for s in YScale],
        default=YScale.LOG.value,
        help="y-axis scale (default log)",
    )
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(sys.argv[1:] if argv is None else list(argv))
    job = PlotJob(
        input_csv=args.input_csv,
        output_image=args.output_image,
        kind=PlotKind(args.kind),
        y_scale=YScale(args.yscale),
    )
    try:
        result = render(job)
    except (SchemaError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    print(f"wrote {result.output_image}")
    return 0


if __name__ == "__main__":
    sys.exit(main())

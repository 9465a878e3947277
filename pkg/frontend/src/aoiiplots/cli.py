"""Command line entry point: ``plot <family> --in results.csv --out fig.png``."""

from __future__ import annotations

import argparse
import sys

from .render import FAMILIES, Constraint, FigureSpec, RenderError, render


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="plot",
        description="Render a paper-style figure family from a results CSV.",
    )
    parser.add_argument("family", choices=FAMILIES, help="figure family to render")
    parser.add_argument("--in", dest="input_csv", required=True, help="results CSV path")
    parser.add_argument("--out", dest="output_path", required=True, help="output image path")
    parser.add_argument(
        "--constraint",
        default="theta_p99_ms<=30",
        help="constrained_best only: feasibility bound, e.g. theta_p99_ms<=30",
    )
    parser.add_argument(
        "--objective",
        default="psi_avg_ms",
        help="constrained_best only: metric minimized among feasible rows",
    )
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        spec = FigureSpec(
            family=args.family,
            input_csv=args.input_csv,
            output_path=args.output_path,
            objective=args.objective,
            constraint=Constraint.parse(args.constraint),
        )
        path = render(spec)
    except RenderError as err:
        print(f"plot error: {err}", file=sys.stderr)
        return 2
    print(path)
    return 0


if __name__ == "__main__":
    sys.exit(main())

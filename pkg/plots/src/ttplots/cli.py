"""Command-line figure rendering: ``plots <kind> <csv...> -o <file>``."""

import argparse
import sys

from .render import KINDS, FigureSpec, render


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="plots",
                                     description="render figures from ttflow result CSVs")
    parser.add_argument("kind", choices=KINDS)
    parser.add_argument("csvs", nargs="+", help="result CSV files (ttflow-csv v1)")
    parser.add_argument("-o", "--output", required=True, help="output image path")
    parser.add_argument("--png", action="store_true", help="write PNG instead of SVG")
    parser.add_argument("--labels", nargs="*", default=None, help="legend labels per CSV")
    args = parser.parse_args(argv)
    spec = FigureSpec(kind=args.kind, inputs=args.csvs, output=args.output,
                      labels=args.labels or [], fmt="png" if args.png else "svg")
    try:
        out = render(spec)
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    print(out)
    return 0


if __name__ == "__main__":
    sys.exit(main())

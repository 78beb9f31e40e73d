"""stopfig command line: render figure specs into image files."""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from .render import FigureError, load_spec, render


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="stopfig", description="Render stopbound CSV artifacts."
    )
    subs = parser.add_subparsers(dest="command", required=True)
    p = subs.add_parser("render", help="render one figure from a spec JSON")
    p.add_argument("--spec", type=Path, required=True, help="FigureSpec JSON file")
    p.add_argument("--out", type=Path, required=True, help="output image path")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        result = render(load_spec(args.spec), args.out)
    except FigureError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    print(
        f"wrote {result.out} ({result.n_points} points, "
        f"x=[{result.x_lim[0]:.4g}, {result.x_lim[1]:.4g}], "
        f"y=[{result.y_lim[0]:.4g}, {result.y_lim[1]:.4g}])"
    )
    return 0


if __name__ == "__main__":
    sys.exit(main())

"""figs <kind> --in <path...> --out <path.png|.svg>"""

from __future__ import annotations

import argparse
import sys

from .io import SchemaError
from .render import KINDS, FigureRequest, render


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="figs", description="Render figures from fockloop output files.")
    parser.add_argument("kind", choices=KINDS)
    parser.add_argument("--in", dest="inputs", nargs="+", required=True,
                        help="input file(s): trajectory CSV or aggregates JSON "
                             "(histograms accepts several, one per target)")
    parser.add_argument("--out", required=True, help="output image (.png, .svg, .pdf)")
    parser.add_argument("--xlim", nargs=2, type=float, default=None)
    parser.add_argument("--ylim", nargs=2, type=float, default=None)
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    request = FigureRequest(kind=args.kind, inputs=tuple(args.inputs), out=args.out,
                            xlim=tuple(args.xlim) if args.xlim else None,
                            ylim=tuple(args.ylim) if args.ylim else None)
    try:
        path = render(request)
    except (SchemaError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    print(path)
    return 0


if __name__ == "__main__":
    sys.exit(main())

"""`plots render --kind KIND --in FILE [--in FILE2] --out FILE`."""

from __future__ import annotations

import argparse
import sys

from .render import SCHEMAS, FigureSpec, SchemaError, render


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="plots", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)
    rend = sub.add_parser("render", help="render one figure from CSV input")
    rend.add_argument("--kind", required=True, choices=sorted(SCHEMAS))
    rend.add_argument("--in", dest="inputs", action="append", required=True, metavar="FILE")
    rend.add_argument("--out", required=True)
    rend.add_argument("--title", default="")
    rend.add_argument("--linear-y", action="store_true", help="force a linear y axis")
    args = parser.parse_args(argv)
    spec = FigureSpec(
        kind=args.kind,
        inputs=tuple(args.inputs),
        output=args.out,
        log_y=False if args.linear_y else None,
        title=args.title,
    )
    try:
        render(spec)
    except SchemaError as err:
        print(f"schema mismatch: {err}", file=sys.stderr)
        return 2
    except FileNotFoundError as err:
        print(f"missing input: {err}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())

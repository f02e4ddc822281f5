"""figgen command line: render mug2 CSV outputs to image files.

Exit codes: 0 success, 1 malformed input, 2 usage error. No image file
is written when the input fails validation.
"""

from __future__ import annotations

import argparse
import sys

from .render import render_fig1, render_wiggle


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="figgen", description=__doc__)
    sub = p.add_subparsers(dest="subcommand", required=True)

    f1 = sub.add_parser("fig1", help="comparison bars from a fig1 CSV")
    f1.add_argument("--in", dest="infile", required=True)
    f1.add_argument("--out", dest="outfile", required=True)

    fw = sub.add_parser("wiggle", help="wiggle histogram with optional fit overlay")
    fw.add_argument("--in", dest="infile", required=True)
    fw.add_argument("--fit", dest="fitfile", default=None,
                    help="key = value fit report; omit for a histogram-only plot")
    fw.add_argument("--out", dest="outfile", required=True)
    return p


def dispatch(argv: list[str]) -> int:
    try:
        args = build_parser().parse_args(argv)
    except SystemExit as e:
        return int(e.code or 0)
    try:
        if args.subcommand == "fig1":
            result = render_fig1(args.infile, args.outfile)
            print(f"wrote {result.image} ({len(result.rows)} bars)")
        else:
            result = render_wiggle(args.infile, args.fitfile, args.outfile)
            extra = ("" if result.residual_mean is None
                     else f", residual mean {result.residual_mean:.3f} sigma")
            print(f"wrote {result.image} ({result.n_bins} bins{extra})")
        return 0
    except (ValueError, FileNotFoundError, OSError) as exc:
        print(f"figgen: error: {exc}", file=sys.stderr)
        return 1


def main():
    sys.exit(dispatch(sys.argv[1:]))


if __name__ == "__main__":
    main()

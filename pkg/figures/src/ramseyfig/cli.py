"""Command line: one subcommand per figure kind.

Each subcommand accepts --spec FILE (a JSON object with FigureSpec fields)
and individual flags; flags override the file.  Exit codes mirror the
producer CLI: 0 success, 2 spec or usage problems, 3 result-file problems.
"""

from __future__ import annotations

import argparse
import json
import sys

from . import __version__
from .errors import FigureError, SpecError
from .render import render
from .spec import FigureKind, FigureSpec, spec_from_json

_KIND_HELP = {
    FigureKind.RmseVsBudget:
        "log-log RMSE vs total shot budget with CRB overlays",
    FigureKind.Robustness:
        "RMSE of fixed plans vs the true decay rate with CRB overlays",
    FigureKind.CrosstalkScaling:
        "coupling RMSE vs chain length with CRB overlays",
    FigureKind.ShotRatio:
        "two-time shot split vs decay-to-detuning ratio",
    FigureKind.CrbLandscape:
        "CRB trace heat map over the two probe times",
}

_FLAG_KEYS = ("csv", "out", "sidecar", "param", "title", "xlabel", "ylabel",
              "dpi")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="ramseyfig",
        description="Render benchmark result files to publication figures")
    parser.add_argument("--version", action="version",
                        version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", metavar="KIND")
    for kind in FigureKind:
        p = sub.add_parser(kind.value, help=_KIND_HELP[kind],
                           description=_KIND_HELP[kind])
        p.add_argument("--spec", metavar="FILE",
                       help="JSON file with FigureSpec fields")
        p.add_argument("--csv", help="input results CSV")
        p.add_argument("--out", help="output image (.png, .svg or .pdf)")
        p.add_argument("--sidecar",
                       help="sidecar JSON (default: csv with .json suffix)")
        if kind is not FigureKind.CrbLandscape:
            p.add_argument("--param",
                           help="parameter column to draw (default per kind)")
        p.add_argument("--title")
        p.add_argument("--xlabel")
        p.add_argument("--ylabel")
        p.add_argument("--dpi", type=int)
    return parser


def merge_spec(kind: FigureKind, args: argparse.Namespace) -> FigureSpec:
    values: dict = {}
    if args.spec:
        try:
            with open(args.spec) as fh:
                blob = json.load(fh)
        except OSError as err:
            raise SpecError(f"cannot read spec file {args.spec}: {err}")
        except json.JSONDecodeError as err:
            raise SpecError(
                f"spec file {args.spec} is not valid JSON: {err}")
        # Full validation happens once below; here the file only needs to
        # be an object so flags can be layered on top of it.
        if not isinstance(blob, dict):
            raise SpecError("figure spec must be a JSON object")
        values.update(blob)
    for name in _FLAG_KEYS:
        flag = getattr(args, name, None)
        if flag is not None:
            values[name] = flag
    return spec_from_json(values, kind)


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as err:
        return err.code if isinstance(err.code, int) else 0
    if args.command is None:
        parser.print_usage(sys.stderr)
        return 2
    try:
        out = render(merge_spec(FigureKind(args.command), args))
    except SpecError as err:
        print(f"error: {err}", file=sys.stderr)
        return 2
    except FigureError as err:
        print(f"error: {err}", file=sys.stderr)
        return 3
    print(f"wrote {out}")
    return 0

"""Script entry: figure kind + input dir (or explicit files) + output path."""

from __future__ import annotations

import argparse
import glob
import json
import os
import sys

from .render import FIGURE_KINDS, FigureDataError, FigureSpec, render

_DEFAULT_NAMES = {
    "trajectory": "trajectory.csv",
    "recurrence": "recurrence.csv",
    "separation": "separation.csv",
    "sweep": "sweep.csv",
    "equilibria": "equilibria.ndjson",
}


def _find_input(input_dir: str, role: str) -> str | None:
    """Locate a conventional file in the run directory or its run*/ children."""
    name = _DEFAULT_NAMES[role]
    direct = os.path.join(input_dir, name)
    if os.path.exists(direct):
        return direct
    hits = sorted(glob.glob(os.path.join(input_dir, "run*", name)))
    return hits[0] if hits else None


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="shrec-figures",
        description="Render figures from shrec run outputs (CSV/NDJSON only)")
    ap.add_argument("kind", choices=FIGURE_KINDS)
    ap.add_argument("--input-dir", default=None,
                    help="run directory holding the conventional file names")
    for role, name in _DEFAULT_NAMES.items():
        ap.add_argument(f"--{role}", default=None, help=f"explicit path to {name}")
    ap.add_argument("--out", required=True, help="output image (.png or .svg)")
    ap.add_argument("--title", default=None)
    ap.add_argument("--logy", action="store_true")
    ap.add_argument("--marker", type=float, default=None,
                    help="vertical threshold marker (sweep_diagram)")
    ap.add_argument("--xlabel", default=None)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    inputs = {}
    for role in _DEFAULT_NAMES:
        explicit = getattr(args, role)
        if explicit:
            inputs[role] = explicit
        elif args.input_dir:
            found = _find_input(args.input_dir, role)
            if found:
                inputs[role] = found
    style = {}
    if args.title:
        style["title"] = args.title
    if args.logy:
        style["logy"] = True
    if args.marker is not None:
        style["marker"] = args.marker
    if args.xlabel:
        style["xlabel"] = args.xlabel
    try:
        spec = FigureSpec(kind=args.kind, inputs=inputs, output=args.out, style=style)
        summary = render(spec)
    except FigureDataError as exc:
        print(json.dumps({"error": "figure-data", "message": str(exc)}),
              file=sys.stderr)
        return 2
    print(json.dumps({"output": args.out, "summary": summary}))
    return 0


if __name__ == "__main__":
    sys.exit(main())

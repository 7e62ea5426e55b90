"""Command-line scenario runner.

Subcommands: spectrum, simulate, theorem41, chafee, sweep.
Exit codes: 0 ok, 2 config error, 3 precondition gate, 4 divergence,
5 internal error.
"""

from __future__ import annotations

import argparse
import json
import sys

import numpy as np

from .config import ConfigError, load_config, parse_config, serialize_config
from .runner import GateError, run_chafee, run_simulate, run_sweep, \
    run_theorem41, spectrum_table
from .spectral import DomainSpec

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_GATE = 3
EXIT_DIVERGED = 4
EXIT_INTERNAL = 5


def _error_record(kind: str, message: str) -> str:
    return json.dumps({"error": kind, "message": message})


def _apply_overrides(cfg, args):
    doc = serialize_config(cfg)
    if getattr(args, "a", None) is not None:
        doc["model"]["a"] = args.a
    if getattr(args, "b", None) is not None:
        doc["model"]["b"] = args.b
    if getattr(args, "t_end", None) is not None:
        doc["integrator"]["t_end"] = args.t_end
    if getattr(args, "M", None) is not None:
        comps = doc["forcing"].get("components", [])
        if not comps:
            raise ConfigError("--M needs a nonzero forcing in the config")
        from .forcing import sup_bound
        from .config import parse_config as _pc

        cur = sup_bound(_pc(doc).forcing)[0]
        if cur == 0:
            raise ConfigError("--M cannot scale a zero-amplitude forcing")
        for comp in comps:
            comp["amplitude"] *= args.M / cur
    return parse_config(doc)


def _add_common(p, with_overrides=True):
    p.add_argument("--config", required=False, help="scenario config (JSON)")
    p.add_argument("--out", default=None, help="output directory")
    p.add_argument("--jobs", type=int, default=1, help="concurrent sweep points")
    p.add_argument("--seed", type=int, default=0,
                   help="base seed for 'random:*' seed specs")
    if with_overrides:
        p.add_argument("--a", type=float, default=None, help="override model.a")
        p.add_argument("--b", type=float, default=None, help="override model.b")
        p.add_argument("--M", type=float, default=None,
                       help="rescale the forcing to this sup bound")
        p.add_argument("--t-end", dest="t_end", type=float, default=None,
                       help="override integrator.t_end")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="shrec",
        description="Pseudospectral desk lab for the recurrently forced "
                    "modified Swift-Hohenberg equation")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("spectrum", help="eigenvalue ladder and index count")
    p.add_argument("--a", type=float, default=0.0)
    p.add_argument("--dimension", type=int, default=1)
    p.add_argument("--lengths", type=str, default=str(np.pi))
    p.add_argument("--modes", type=str, default="128")
    p.add_argument("--out", default=None, help="optional CSV path")

    p = sub.add_parser("simulate", help="integrate the configured seeds")
    _add_common(p)

    p = sub.add_parser("theorem41",
                       help="paired-run experiment: two separated "
                            "recurrent-evidence orbits")
    _add_common(p)

    p = sub.add_parser("chafee",
                       help="three-run experiment for the second-order model")
    _add_common(p)

    p = sub.add_parser("sweep", help="parameter sweep with per-point reports")
    _add_common(p)
    p.add_argument("--axis", choices=("a", "b", "M"), required=True)
    p.add_argument("--grid", required=True,
                   help="comma list '0.1,0.2' or range 'start:stop:count'")
    return ap


def _parse_grid(spec: str):
    if ":" in spec:
        start, stop, count = spec.split(":")
        return np.linspace(float(start), float(stop), int(count))
    return np.array([float(x) for x in spec.split(",")])


def _cmd_spectrum(args) -> int:
    lengths = tuple(float(x) for x in args.lengths.split(","))
    modes = tuple(int(x) for x in args.modes.split(","))
    domain = DomainSpec(args.dimension, lengths, modes)
    rows, lam0, r = spectrum_table(domain, args.a)
    print(f"{'mu':>14} {'lambda(a)':>14} {'mult':>5}")
    for mu, lam, mult in rows[:16]:
        print(f"{mu:14.6g} {lam:14.6g} {mult:5d}")
    if len(rows) > 16:
        print(f"... ({len(rows)} ladder levels total)")
    print(f"lam0 = {lam0:.17g}")
    print(f"index count r at the origin: {r}")
    if args.out:
        with open(args.out, "w", newline="\n") as f:
            f.write("mu,lambda,mult\n")
            for mu, lam, mult in rows:
                f.write(f"{mu:.17g},{lam:.17g},{mult}\n")
    return EXIT_OK


def _load(args):
    if not args.config:
        raise ConfigError("--config is required for this subcommand")
    cfg = load_config(args.config)
    return _apply_overrides(cfg, args)


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "spectrum":
            return _cmd_spectrum(args)

        cfg = _load(args)
        out_dir = args.out or cfg.out_dir

        if args.command == "simulate":
            status = run_simulate(cfg, out_dir, base_seed=args.seed)
            if status == "diverged":
                print(_error_record("diverged",
                                    "at least one run hit the divergence gate; "
                                    "partial trajectories were written"))
                return EXIT_DIVERGED
            print(f"simulate: ok ({out_dir})")
            return EXIT_OK

        if args.command == "theorem41":
            result = run_theorem41(cfg, out_dir)
            for line in result.lines:
                print(line)
            return EXIT_OK

        if args.command == "chafee":
            result = run_chafee(cfg, out_dir)
            for line in result.lines:
                print(line)
            return EXIT_OK

        if args.command == "sweep":
            rows = run_sweep(cfg, out_dir, args.axis, _parse_grid(args.grid),
                             jobs=args.jobs)
            n_err = sum(1 for r in rows if r.get("status") != "ok")
            print(f"sweep: {len(rows)} points, {n_err} failed ({out_dir}/sweep.csv)")
            return EXIT_OK

        raise RuntimeError(f"unhandled command {args.command}")
    except ConfigError as exc:
        print(_error_record("config", str(exc)), file=sys.stderr)
        return EXIT_CONFIG
    except GateError as exc:
        print(_error_record("gate", str(exc)), file=sys.stderr)
        return EXIT_GATE
    except RuntimeError as exc:
        if "diverged" in str(exc):
            print(_error_record("diverged", str(exc)), file=sys.stderr)
            return EXIT_DIVERGED
        print(_error_record("internal", str(exc)), file=sys.stderr)
        return EXIT_INTERNAL
    except Exception as exc:  # pragma: no cover - defensive
        print(_error_record("internal", f"{type(exc).__name__}: {exc}"),
              file=sys.stderr)
        return EXIT_INTERNAL


if __name__ == "__main__":
    sys.exit(main())

"""Deterministic batch rendering of simulator run outputs.

Every figure is a pure function of its input files and style options; the
physics is never recomputed here. Outputs are PNG or SVG with metadata
scrubbed so re-rendering the same inputs is byte-identical.
"""

from __future__ import annotations

import csv
import json
import os
from dataclasses import dataclass, field

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

FIGURE_KINDS = ("lyapunov_decay", "norm_traces", "eps_ell_curve",
                "separation_vs_shift", "sweep_diagram")

STYLE_VERSION = "1"
_RC = {
    "figure.figsize": (6.4, 4.0),
    "figure.dpi": 110,
    "savefig.dpi": 110,
    "font.size": 10,
    "svg.hashsalt": "shrec-figures-" + STYLE_VERSION,
    "axes.grid": True,
    "grid.alpha": 0.3,
}


class FigureDataError(ValueError):
    """Missing input file or column in a run output."""


@dataclass
class FigureSpec:
    kind: str
    inputs: dict                     # role -> path (see KIND_INPUTS)
    output: str
    style: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.kind not in FIGURE_KINDS:
            raise FigureDataError(f"unknown figure kind {self.kind!r}")


KIND_INPUTS = {
    "lyapunov_decay": ("trajectory", "equilibria?"),
    "norm_traces": ("trajectory",),
    "eps_ell_curve": ("recurrence",),
    "separation_vs_shift": ("separation",),
    "sweep_diagram": ("sweep",),
}


def read_csv_columns(path, required):
    if not os.path.exists(path):
        raise FigureDataError(f"input file not found: {path}")
    with open(path, newline="") as f:
        reader = csv.DictReader(f)
        cols = reader.fieldnames or []
        for c in required:
            if c not in cols:
                raise FigureDataError(f"missing column {c!r} in {path}")
        rows = list(reader)
    out = {}
    for c in cols:
        vals = [r[c] for r in rows]
        try:
            out[c] = np.array([float(v) for v in vals])
        except ValueError:
            out[c] = np.array(vals)
    return out


def read_equilibria(path):
    if not os.path.exists(path):
        raise FigureDataError(f"input file not found: {path}")
    recs = []
    with open(path) as f:
        for line in f:
            line = line.strip()
            if line:
                recs.append(json.loads(line))
    for r in recs:
        if "V" not in r:
            raise FigureDataError(f"missing field 'V' in {path}")
    return recs


def _save(fig, path):
    ext = os.path.splitext(path)[1].lower()
    if ext == ".png":
        meta = {"Software": f"shrec-figures/{STYLE_VERSION}"}
    elif ext == ".svg":
        # scrub the timestamp so identical inputs give identical bytes
        meta = {"Date": None, "Creator": f"shrec-figures/{STYLE_VERSION}"}
    else:
        raise FigureDataError(f"unsupported output format {ext!r} (png or svg)")
    fig.savefig(path, metadata=meta)
    plt.close(fig)


def _new_fig(style):
    fig, ax = plt.subplots()
    if style.get("title"):
        ax.set_title(style["title"])
    return fig, ax


def render(spec: FigureSpec) -> dict:
    """Render one figure; returns summary scalars for captions and checks."""
    with plt.rc_context(_RC):
        fn = _RENDERERS[spec.kind]
        return fn(spec)


def _render_lyapunov(spec):
    data = read_csv_columns(spec.inputs["trajectory"], ("t", "V"))
    fig, ax = _new_fig(spec.style)
    ax.plot(data["t"], data["V"], color="tab:blue", lw=1.2)
    ax.set_xlabel("t")
    ax.set_ylabel("V")
    summary = {"final_ordinate": float(data["V"][-1]),
               "initial_ordinate": float(data["V"][0])}
    eq_path = spec.inputs.get("equilibria")
    if eq_path:
        recs = read_equilibria(eq_path)
        nontrivial = [r for r in recs if r.get("l2", 1.0) > 1e-8]
        if nontrivial:
            v0 = min(r["V"] for r in nontrivial)
            ax.axhline(v0, color="tab:red", ls="--", lw=1.0,
                       label=f"well value {v0:.6g}")
            ax.legend(loc="upper right")
            summary["well_V"] = float(v0)
    _save(fig, spec.output)
    return summary


def _render_norm_traces(spec):
    data = read_csv_columns(spec.inputs["trajectory"], ("t", "l2", "l4", "h2"))
    fig, ax = _new_fig(spec.style)
    for col, color in (("l2", "tab:blue"), ("l4", "tab:orange"), ("h2", "tab:green")):
        ax.plot(data["t"], data[col], lw=1.0, color=color, label=col)
    if spec.style.get("logy"):
        ax.set_yscale("log")
    ax.set_xlabel("t")
    ax.set_ylabel("norm")
    ax.legend(loc="best")
    _save(fig, spec.output)
    return {"final_l2": float(data["l2"][-1]), "max_h2": float(data["h2"].max())}


def _render_eps_ell(spec):
    data = read_csv_columns(spec.inputs["recurrence"], ("eps", "ell"))
    order = np.argsort(data["eps"])
    eps, ell = data["eps"][order], data["ell"][order]
    fig, ax = _new_fig(spec.style)
    ax.step(eps, ell, where="post", color="tab:blue", marker="o")
    ax.set_xlabel("eps")
    ax.set_ylabel("ell(eps)")
    _save(fig, spec.output)
    return {"n_rows": int(len(eps)),
            "monotone_nonincreasing": bool(np.all(np.diff(ell) <= 1e-12))}


def _render_separation(spec):
    data = read_csv_columns(spec.inputs["separation"], ("shift", "distance"))
    fig, ax = _new_fig(spec.style)
    ax.plot(data["shift"], data["distance"], color="tab:blue", lw=1.0)
    i = int(np.argmin(data["distance"]))
    ax.plot([data["shift"][i]], [data["distance"][i]], "rv",
            label=f"min {data['distance'][i]:.4g}")
    ax.set_xlabel("relative shift")
    ax.set_ylabel("mean tail distance")
    ax.legend(loc="best")
    _save(fig, spec.output)
    return {"min_distance": float(data["distance"][i]),
            "best_shift": float(data["shift"][i])}


def _render_sweep(spec):
    data = read_csv_columns(spec.inputs["sweep"], ("value", "r", "n_equilibria"))
    ok = data.get("status")
    mask = np.ones(len(data["value"]), dtype=bool)
    if ok is not None and ok.dtype.kind in "US":
        mask = ok == "ok"
    v = data["value"][mask]

    def as_float(col):
        raw = data[col][mask]
        if raw.dtype.kind in "US":
            return np.array([float(x) if x not in ("", "None") else np.nan for x in raw])
        return raw

    r = as_float("r")
    neq = as_float("n_equilibria")
    fig, ax = _new_fig(spec.style)
    ax.plot(v, r, "o-", color="tab:blue", label="index count r")
    ax.plot(v, neq, "s-", color="tab:orange", label="equilibrium count")
    marker = spec.style.get("marker")
    if marker is not None:
        ax.axvline(float(marker), color="tab:red", ls="--", lw=1.0,
                   label=f"threshold {float(marker):g}")
    ax.set_xlabel(spec.style.get("xlabel", "parameter"))
    ax.set_ylabel("count")
    ax.legend(loc="best")
    _save(fig, spec.output)
    return {"n_points": int(mask.sum())}


_RENDERERS = {
    "lyapunov_decay": _render_lyapunov,
    "norm_traces": _render_norm_traces,
    "eps_ell_curve": _render_eps_ell,
    "separation_vs_shift": _render_separation,
    "sweep_diagram": _render_sweep,
}

"""Scenario execution: run directories, analyses, manifests.

Every entry point writes its outputs into one directory per run and a
manifest last, so the presence of a manifest certifies a completed run.
All floats in CSV outputs carry 17 significant digits; identical configs
and seeds reproduce byte-identical CSV files.
"""

from __future__ import annotations

import json
import os
import time
from dataclasses import dataclass

import numpy as np

from . import __version__
from .bounds import compute_R0, verify_absorbing, verify_energy_inequality, \
    verify_h2_regularization, write_bounds_csv
from .config import ScenarioConfig, config_hash, make_seed_field, serialize_config
from .dynamics import IntegratorConfig, Stepper, Trajectory, \
    duhamel_residual, integrate
from .forcing import ForcingModel, sup_bound, zero_forcing
from .gradient import default_seeds, find_equilibria, morse_decomposition, \
    morse_index_zero
from .recurrence import epsilon_ell_table, separation
from .spectral import build_spectrum, lambda_ladder, zero_field

__all__ = ["GateError", "run_simulate", "run_theorem41", "run_chafee",
           "run_sweep", "spectrum_table", "write_manifest"]


class GateError(RuntimeError):
    """A precondition gate refused the run (exit code 3)."""


def _fmt(x) -> str:
    return f"{x:.17g}"


def write_manifest(out_dir: str, cfg: ScenarioConfig | None, status: str,
                   wall_time: float, note: str = "") -> None:
    files = {}
    for root, _dirs, names in os.walk(out_dir):
        for name in sorted(names):
            if name == "manifest":
                continue
            path = os.path.join(root, name)
            files[os.path.relpath(path, out_dir)] = os.path.getsize(path)
    doc = {
        "config_hash": config_hash(cfg) if cfg is not None else None,
        "versions": {"shrec": __version__, "numpy": np.__version__},
        "wall_time_s": wall_time,
        "files": files,
        "exit_status": status,
    }
    if note:
        doc["note"] = note
    tmp = os.path.join(out_dir, "manifest.tmp")
    with open(tmp, "w") as f:
        json.dump(doc, f, indent=1, sort_keys=True)
        f.write("\n")
    os.replace(tmp, os.path.join(out_dir, "manifest"))  # atomic: written last


def _seed_dir_name(i: int, spec: str) -> str:
    safe = spec.replace(":", "_").replace(",", "_").replace("*", "x")
    return f"run{i:03d}_{safe}"


def _equilibrium_inventory(cfg: ScenarioConfig):
    model = cfg.model
    return find_equilibria(model.a, model.b,
                           default_seeds(model.domain, model.a, kind=model.kind),
                           kind=model.kind)


def _write_equilibria(path, equilibria, a, b) -> None:
    with open(path, "w", newline="\n") as f:
        for i, e in enumerate(equilibria):
            rec = e.to_record()
            rec.update({"index": i, "a": a, "b": b})
            f.write(json.dumps(rec) + "\n")


def _forcing_sup(g: ForcingModel) -> float:
    return sup_bound(g)[0]


def _run_single(cfg: ScenarioConfig, seed_field, run_dir: str,
                stepper: Stepper | None = None) -> Trajectory:
    os.makedirs(run_dir, exist_ok=True)
    traj = integrate(cfg.model, cfg.forcing, seed_field, 0.0, cfg.integrator,
                     stepper=stepper)
    traj.write_csv(os.path.join(run_dir, "trajectory.csv"))
    if "ndjson" in cfg.formats:
        traj.write_ndjson(os.path.join(run_dir, "coeffs.ndjson"))
    if cfg.analyses.bounds:
        consts = compute_R0(cfg.model.a, cfg.analyses.b_tilde,
                            _forcing_sup(cfg.forcing), cfg.domain.measure)
        reports = [verify_energy_inequality(traj, consts, _forcing_sup(cfg.forcing)),
                   verify_absorbing(traj, consts, _forcing_sup(cfg.forcing)),
                   verify_h2_regularization(traj)]
        write_bounds_csv(os.path.join(run_dir, "bounds.csv"), reports)
    if cfg.analyses.recurrence and traj.error is None:
        rep = epsilon_ell_table(traj, cfg.analyses.eps, burn_in=cfg.burn_in())
        rep.write_csv(os.path.join(run_dir, "recurrence.csv"))
    if cfg.analyses.duhamel and traj.error is None:
        r = duhamel_residual(traj, cfg.forcing, cfg.model,
                             stride=cfg.analyses.duhamel_stride)
        with open(os.path.join(run_dir, "duhamel.csv"), "w", newline="\n") as f:
            f.write("stride,residual\n")
            f.write(f"{cfg.analyses.duhamel_stride},{_fmt(r)}\n")
    return traj


def run_simulate(cfg: ScenarioConfig, out_dir: str, base_seed: int = 0) -> str:
    """One directory per seed; equilibrium inventory when requested; manifest last.

    Returns the final status: "ok" or "diverged".
    """
    t0 = time.time()
    os.makedirs(out_dir, exist_ok=True)
    equilibria = None
    needs_inventory = cfg.analyses.morse or any(
        s.startswith("equilibrium") for s in cfg.seeds)
    if needs_inventory:
        equilibria = _equilibrium_inventory(cfg)
        _write_equilibria(os.path.join(out_dir, "equilibria.ndjson"),
                          equilibria, cfg.model.a, cfg.model.b)
    if cfg.analyses.morse:
        rep = morse_decomposition(cfg.model.a, cfg.model.b, domain=cfg.domain)
        with open(os.path.join(out_dir, "morse_summary.csv"), "w", newline="\n") as f:
            f.write("a,b,r_zero,count_K0,min_V\n")
            r = rep.summary_row()
            f.write(",".join(_fmt(r[k]) if isinstance(r[k], float) else str(r[k])
                             for k in ("a", "b", "r_zero", "count_K0", "min_V")) + "\n")

    status = "ok"
    stepper = Stepper(cfg.model, cfg.integrator.dt, cfg.integrator.scheme,
                      padded=cfg.integrator.padded)
    for i, spec in enumerate(cfg.seeds):
        seed_field = make_seed_field(spec, cfg.domain, equilibria, base_seed)
        traj = _run_single(cfg, seed_field, os.path.join(out_dir, _seed_dir_name(i, spec)),
                           stepper=stepper)
        if traj.error is not None:
            status = "diverged"
    write_manifest(out_dir, cfg, status, time.time() - t0)
    return status


# ---------------------------------------------------------------------------
# paired/tripled recurrent-orbit experiments

@dataclass
class OrbitExperimentResult:
    verdict: bool
    runs: list
    reports: list
    separations: list            # ((i, j), SeparationReport)
    u0_norm: float
    lines: list


def _experiment_gates(cfg: ScenarioConfig, need: str) -> dict:
    spectrum = build_spectrum(cfg.domain)
    ladder = lambda_ladder(spectrum, cfg.model.a)
    M = _forcing_sup(cfg.forcing)
    info = {"lam0": ladder.lam0, "M": M, "mu1": spectrum.mu[0],
            "r": morse_index_zero(cfg.model.a, spectrum)}
    if abs(cfg.model.b) > cfg.analyses.b_tilde:
        raise GateError(f"|b| = {abs(cfg.model.b):g} exceeds the gate "
                        f"b_tilde = {cfg.analyses.b_tilde:g}")
    if M > cfg.analyses.forcing_gate:
        raise GateError(f"forcing sup {M:g} exceeds the gate "
                        f"{cfg.analyses.forcing_gate:g}")
    if need == "two" and not cfg.model.a < -ladder.lam0:
        raise GateError(
            f"instability condition fails: a = {cfg.model.a:g} is not below "
            f"-lam0 = {-ladder.lam0:g} (lam0 = min over the ladder of mu^2 - 2 mu)")
    if need == "three" and not cfg.model.a > spectrum.mu[0]:
        raise GateError(f"a = {cfg.model.a:g} is not above mu_1 = {spectrum.mu[0]:g}")
    return info


def _even_mode_mask(domain) -> np.ndarray | None:
    if domain.dimension != 1:
        return None
    k = np.arange(1, domain.modes[0] + 1)
    return (k % 2 == 0).astype(float)


def _forcing_is_even(g: ForcingModel) -> bool:
    if g.kind == "zero":
        return True
    for c in g.components:
        coeffs = c.profile.coeffs
        if coeffs.ndim != 1:
            return False
        if np.any(coeffs[0::2] != 0.0):  # odd mode indices k=1,3,... at 0,2,...
            return False
    return True


def run_theorem41(cfg: ScenarioConfig, out_dir: str) -> OrbitExperimentResult:
    """Two forced runs (origin basin, nontrivial-well basin) with recurrence
    evidence and a separation certificate; verdict line at the end."""
    t0 = time.time()
    gates = _experiment_gates(cfg, need="two")
    os.makedirs(out_dir, exist_ok=True)
    lines = [f"gate: a = {cfg.model.a:g} < -lam0 = {-gates['lam0']:g}; "
             f"M(g) = {gates['M']:g}; |b| = {abs(cfg.model.b):g}; r = {gates['r']}"]

    equilibria = _equilibrium_inventory(cfg)
    _write_equilibria(os.path.join(out_dir, "equilibria.ndjson"),
                      equilibria, cfg.model.a, cfg.model.b)
    nontrivial = [e for e in equilibria if e.state.l2() > 1e-8]
    if not nontrivial:
        raise GateError("no nontrivial equilibrium found; nothing to separate")
    u0 = min(nontrivial, key=lambda e: e.V)
    lines.append(f"u0: |u0| = {u0.state.l2():.6g}, V = {u0.V:.6g}")

    seeds = [("zero", zero_field(cfg.domain)), ("u0", u0.state)]
    runs, reports = [], []
    for i, (name, field) in enumerate(seeds):
        rd = os.path.join(out_dir, f"run{i}_{name}")
        traj = _run_single(cfg, field, rd)
        if traj.error is not None:
            write_manifest(out_dir, cfg, "diverged", time.time() - t0)
            raise RuntimeError(f"run {name} diverged")
        rep = epsilon_ell_table(traj, cfg.analyses.eps, burn_in=cfg.burn_in())
        rep.write_csv(os.path.join(rd, "recurrence.csv"))
        runs.append(traj)
        reports.append(rep)
        lines.append(f"run{i} ({name}): {rep.summary_line()}")

    sep = separation(runs[0], runs[1], burn_in=cfg.burn_in(),
                     pair=("zero", "u0"))
    sep.write_csv(os.path.join(out_dir, "separation.csv"))
    lines.append(f"separation: min over shifts = {sep.min_shift_distance:.6g} "
                 f"(threshold {0.5 * u0.state.l2():.6g})")

    verdict = (all(r.verdict == "recurrent_evidence" for r in reports)
               and sep.min_shift_distance >= 0.5 * u0.state.l2())
    lines.append(f"two distinct recurrent-evidence orbits: {'yes' if verdict else 'no'}")
    with open(os.path.join(out_dir, "verdict.txt"), "w", newline="\n") as f:
        f.write("\n".join(lines) + "\n")
    write_manifest(out_dir, cfg, "ok", time.time() - t0)
    return OrbitExperimentResult(verdict=verdict, runs=runs, reports=reports,
                                 separations=[((0, 1), sep)],
                                 u0_norm=u0.state.l2(), lines=lines)


def run_chafee(cfg: ScenarioConfig, out_dir: str) -> OrbitExperimentResult:
    """Three forced runs (origin and the two wells) for the second-order model.

    The origin is unstable here, so its orbit is computed in the even-mode
    subspace, which the exact dynamics leaves invariant whenever the forcing
    has no odd-mode content; otherwise round-off would seed the instability
    and the leg would drift into a well.
    """
    t0 = time.time()
    if cfg.model.kind != "chafee_infante":
        raise GateError("this experiment needs model.kind = chafee_infante")
    gates = _experiment_gates(cfg, need="three")
    os.makedirs(out_dir, exist_ok=True)
    lines = [f"gate: a = {cfg.model.a:g} > mu_1 = {gates['mu1']:g}; "
             f"M(g) = {gates['M']:g}"]

    equilibria = _equilibrium_inventory(cfg)
    _write_equilibria(os.path.join(out_dir, "equilibria.ndjson"),
                      equilibria, cfg.model.a, cfg.model.b)
    plus = [e for e in equilibria if e.state.l2() > 1e-8
            and e.state.coeffs.ravel()[0] > 0]
    minus = [e for e in equilibria if e.state.l2() > 1e-8
             and e.state.coeffs.ravel()[0] < 0]
    if not plus or not minus:
        raise GateError("expected a symmetric pair of nontrivial equilibria")
    u_plus, u_minus = plus[0], minus[0]
    u0_norm = u_plus.state.l2()
    lines.append(f"u0: |u0| = {u0_norm:.6g}")

    even_ok = _forcing_is_even(cfg.forcing)
    mask = _even_mode_mask(cfg.domain) if even_ok else None
    if not even_ok:
        lines.append("warning: forcing has odd-mode content; the origin leg "
                     "integrates the full dynamics and may escape")
    seeds = [("zero", zero_field(cfg.domain), mask),
             ("uplus", u_plus.state, None),
             ("uminus", u_minus.state, None)]
    runs, reports = [], []
    for i, (name, field, mmask) in enumerate(seeds):
        rd = os.path.join(out_dir, f"run{i}_{name}")
        stepper = Stepper(cfg.model, cfg.integrator.dt, cfg.integrator.scheme,
                          padded=cfg.integrator.padded, mode_mask=mmask)
        traj = _run_single(cfg, field, rd, stepper=stepper)
        if traj.error is not None:
            write_manifest(out_dir, cfg, "diverged", time.time() - t0)
            raise RuntimeError(f"run {name} diverged")
        rep = epsilon_ell_table(traj, cfg.analyses.eps, burn_in=cfg.burn_in())
        rep.write_csv(os.path.join(rd, "recurrence.csv"))
        runs.append(traj)
        reports.append(rep)
        lines.append(f"run{i} ({name}): {rep.summary_line()}")

    separations = []
    ok_sep = True
    for i in range(3):
        for j in range(i + 1, 3):
            sep = separation(runs[i], runs[j], burn_in=cfg.burn_in(),
                             pair=(seeds[i][0], seeds[j][0]))
            sep.write_csv(os.path.join(out_dir, f"separation_{i}{j}.csv"))
            separations.append(((i, j), sep))
            ok = sep.min_shift_distance >= 0.5 * u0_norm
            ok_sep = ok_sep and ok
            lines.append(f"separation {i}-{j}: {sep.min_shift_distance:.6g} "
                         f"({'ok' if ok else 'below threshold'})")

    verdict = ok_sep and all(r.verdict == "recurrent_evidence" for r in reports)
    lines.append(f"three distinct recurrent-evidence orbits: {'yes' if verdict else 'no'}")
    with open(os.path.join(out_dir, "verdict.txt"), "w", newline="\n") as f:
        f.write("\n".join(lines) + "\n")
    write_manifest(out_dir, cfg, "ok", time.time() - t0)
    return OrbitExperimentResult(verdict=verdict, runs=runs, reports=reports,
                                 separations=separations, u0_norm=u0_norm,
                                 lines=lines)


# ---------------------------------------------------------------------------
# parameter sweep

def _sweep_point(args):
    cfg, axis, value, point_dir = args
    from .config import parse_config

    doc = serialize_config(cfg)
    if axis == "a":
        doc["model"]["a"] = value
    elif axis == "b":
        doc["model"]["b"] = value
    elif axis == "M":
        current = _forcing_sup(cfg.forcing)
        if current == 0:
            return {"axis": axis, "value": value, "status": "error",
                    "error": "cannot scale a zero forcing to a target sup"}
        scale = value / current
        for comp in doc["forcing"].get("components", []):
            comp["amplitude"] *= scale
    else:
        return {"axis": axis, "value": value, "status": "error",
                "error": f"unknown axis {axis!r}"}
    try:
        pcfg = parse_config(doc)
        row = _evaluate_sweep_point(pcfg, axis, value, point_dir)
        row.update({"axis": axis, "value": value, "status": "ok"})
        return row
    except Exception as exc:  # per-point failures recorded, sweep continues
        return {"axis": axis, "value": value, "status": "error", "error": str(exc)}


def _evaluate_sweep_point(cfg: ScenarioConfig, axis: str, value: float,
                          point_dir: str) -> dict:
    os.makedirs(point_dir, exist_ok=True)
    spectrum = build_spectrum(cfg.domain)
    r = morse_index_zero(cfg.model.a, spectrum)
    equilibria = _equilibrium_inventory(cfg)
    _write_equilibria(os.path.join(point_dir, "equilibria.ndjson"),
                      equilibria, cfg.model.a, cfg.model.b)
    n_K0 = sum(1 for e in equilibria if e.V < -1e-12)
    min_V = min((e.V for e in equilibria), default=0.0)
    row = {"r": r, "n_equilibria": len(equilibria), "count_K0": n_K0,
           "min_V": min_V, "verdict": "", "vmono_fail_fraction": ""}

    if axis == "b" and cfg.model.kind == "modified_swift_hohenberg":
        # fraction of recorded steps where the b = 0 Lyapunov value rises
        traj = integrate(cfg.model, zero_forcing(cfg.domain),
                         make_seed_field("mode:1,0.1", cfg.domain), 0.0,
                         IntegratorConfig(dt=cfg.integrator.dt, t_end=min(20.0, cfg.integrator.t_end),
                                          record_every=cfg.integrator.record_every))
        dV = np.diff(traj.lyapunov)
        bad = dV > 1e-8 * (1.0 + np.abs(traj.lyapunov[:-1]))
        row["vmono_fail_fraction"] = float(np.mean(bad)) if len(dV) else 0.0

    if cfg.analyses.recurrence and cfg.forcing.kind != "zero":
        traj = _run_single(cfg, zero_field(cfg.domain), point_dir)
        if traj.error is None:
            rep = epsilon_ell_table(traj, cfg.analyses.eps, burn_in=cfg.burn_in())
            row["verdict"] = rep.verdict
        else:
            row["verdict"] = "diverged"
    return row


def run_sweep(cfg: ScenarioConfig, out_dir: str, axis: str, grid,
              jobs: int = 1) -> list[dict]:
    t0 = time.time()
    os.makedirs(out_dir, exist_ok=True)
    tasks = [(cfg, axis, float(v), os.path.join(out_dir, f"point{i:03d}"))
             for i, v in enumerate(grid)]
    if jobs > 1:
        from concurrent.futures import ProcessPoolExecutor

        with ProcessPoolExecutor(max_workers=jobs) as ex:
            rows = list(ex.map(_sweep_point, tasks))
    else:
        rows = [_sweep_point(t) for t in tasks]

    cols = ["axis", "value", "status", "r", "n_equilibria", "count_K0",
            "min_V", "verdict", "vmono_fail_fraction", "error"]
    with open(os.path.join(out_dir, "sweep.csv"), "w", newline="\n") as f:
        f.write(",".join(cols) + "\n")
        for row in rows:
            out = []
            for c in cols:
                v = row.get(c, "")
                out.append(_fmt(v) if isinstance(v, float) else str(v))
            f.write(",".join(out) + "\n")
    write_manifest(out_dir, cfg, "ok", time.time() - t0)
    return rows


def spectrum_table(domain, a: float):
    """Rows (mu, lambda(a), multiplicity) plus lam0 and the index count."""
    spectrum = build_spectrum(domain)
    ladder = lambda_ladder(spectrum, a)
    rows = [(mu, lam, r) for mu, (lam, r) in zip(spectrum.mu, ladder.entries)]
    return rows, ladder.lam0, morse_index_zero(a, spectrum)

"""Strict scenario configuration: parse, validate, serialize.

The config is a single JSON document with the sections model, domain,
forcing, integrator, analyses, seeds, output. Unknown keys anywhere are
errors; silent typos must not pass. parse -> serialize -> parse is the
identity on the canonical form.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass

import numpy as np

from .dynamics import MODEL_KINDS, IntegratorConfig, ModelSpec
from .forcing import FORCING_KINDS, ForcingComponent, ForcingModel, zero_forcing
from .spectral import DomainSpec, SpectralField, mode_field

__all__ = ["ScenarioConfig", "ConfigError", "load_config", "parse_config",
           "serialize_config", "config_hash", "make_seed_field"]


class ConfigError(ValueError):
    """Malformed or inconsistent scenario configuration."""


_TOP_KEYS = {"model", "domain", "forcing", "integrator", "analyses", "seeds", "output"}
_MODEL_KEYS = {"kind", "a", "b"}
_DOMAIN_KEYS = {"dimension", "lengths", "modes"}
_FORCING_KEYS = {"kind", "components"}
_COMPONENT_KEYS = {"amplitude", "frequency", "phase", "profile"}
_PROFILE_KEYS = {"mode", "coeff", "normalize", "coeffs"}
_INTEGRATOR_KEYS = {"dt", "scheme", "t_end", "record_every", "padded"}
_ANALYSES_KEYS = {"bounds", "recurrence", "morse", "duhamel",
                  "eps", "burn_in", "b_tilde", "forcing_gate", "duhamel_stride"}
_OUTPUT_KEYS = {"directory", "formats"}


def _check_keys(section: dict, allowed: set, where: str) -> None:
    unknown = set(section) - allowed
    if unknown:
        raise ConfigError(f"unknown key(s) {sorted(unknown)} in {where}")


@dataclass
class AnalysisFlags:
    bounds: bool = False
    recurrence: bool = False
    morse: bool = False
    duhamel: bool = False
    eps: tuple[float, ...] = (0.1, 0.05)
    burn_in: float | None = None          # default: horizon / 5
    b_tilde: float = 1.0
    forcing_gate: float = 0.2             # largest admissible forcing sup
    duhamel_stride: int = 8


@dataclass
class ScenarioConfig:
    model: ModelSpec
    forcing: ForcingModel
    integrator: IntegratorConfig
    analyses: AnalysisFlags
    seeds: tuple[str, ...]
    out_dir: str
    formats: tuple[str, ...]

    @property
    def domain(self) -> DomainSpec:
        return self.model.domain

    def burn_in(self) -> float:
        if self.analyses.burn_in is not None:
            return self.analyses.burn_in
        return self.integrator.t_end / 5.0


def _parse_profile(spec: dict, domain: DomainSpec) -> SpectralField:
    _check_keys(spec, _PROFILE_KEYS, "forcing.components[].profile")
    if "coeffs" in spec:
        arr = np.asarray(spec["coeffs"], dtype=float).reshape(domain.modes)
        prof = SpectralField(arr, domain)
    elif "mode" in spec:
        k = spec["mode"]
        k = tuple(k) if isinstance(k, (list, tuple)) else int(k)
        prof = mode_field(domain, k, float(spec.get("coeff", 1.0)))
    else:
        raise ConfigError("profile needs 'mode' or 'coeffs'")
    if spec.get("normalize", False):
        n = prof.l2()
        if n == 0:
            raise ConfigError("cannot normalize a zero profile")
        prof = prof.with_coeffs(prof.coeffs / n)
    return prof


def _profile_to_json(profile: SpectralField) -> dict:
    c = profile.coeffs
    nz = np.nonzero(c.ravel())[0]
    if len(nz) == 1 and profile.domain.dimension == 1:
        return {"mode": int(nz[0] + 1), "coeff": float(c.ravel()[nz[0]])}
    return {"coeffs": [float(x) for x in c.ravel()]}


def parse_config(doc: dict) -> ScenarioConfig:
    if not isinstance(doc, dict):
        raise ConfigError("config root must be an object")
    _check_keys(doc, _TOP_KEYS, "config root")
    for key in ("model", "domain", "integrator"):
        if key not in doc:
            raise ConfigError(f"missing required section {key!r}")

    dsec = dict(doc["domain"])
    _check_keys(dsec, _DOMAIN_KEYS, "domain")
    try:
        domain = DomainSpec(int(dsec.get("dimension", 1)),
                            tuple(float(x) for x in np.atleast_1d(dsec.get("lengths", (np.pi,)))),
                            tuple(int(x) for x in np.atleast_1d(dsec.get("modes", (128,)))))
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc

    msec = dict(doc["model"])
    _check_keys(msec, _MODEL_KEYS, "model")
    kind = msec.get("kind", "modified_swift_hohenberg")
    if kind not in MODEL_KINDS:
        raise ConfigError(f"unknown model kind {kind!r}")
    model = ModelSpec(kind=kind, a=float(msec.get("a", 0.5)),
                      b=float(msec.get("b", 0.0)), domain=domain)

    fsec = dict(doc.get("forcing", {"kind": "zero"}))
    _check_keys(fsec, _FORCING_KEYS, "forcing")
    fkind = fsec.get("kind", "zero")
    if fkind not in FORCING_KINDS:
        raise ConfigError(f"unknown forcing kind {fkind!r}")
    if fkind == "zero":
        forcing = zero_forcing(domain)
    else:
        comps = []
        for i, cs in enumerate(fsec.get("components", [])):
            cs = dict(cs)
            _check_keys(cs, _COMPONENT_KEYS, f"forcing.components[{i}]")
            for req in ("amplitude", "frequency", "profile"):
                if req not in cs:
                    raise ConfigError(f"forcing.components[{i}] missing {req!r}")
            comps.append(ForcingComponent(
                amplitude=float(cs["amplitude"]), frequency=float(cs["frequency"]),
                phase=float(cs.get("phase", 0.0)),
                profile=_parse_profile(dict(cs["profile"]), domain)))
        try:
            forcing = ForcingModel(fkind, tuple(comps))
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc

    isec = dict(doc["integrator"])
    _check_keys(isec, _INTEGRATOR_KEYS, "integrator")
    try:
        integrator = IntegratorConfig(
            dt=float(isec.get("dt", 1e-3)),
            scheme=str(isec.get("scheme", "etd_rk4")),
            t_end=float(isec.get("t_end", 200.0)),
            record_every=int(isec.get("record_every", 50)),
            padded=bool(isec.get("padded", True)))
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc

    asec = dict(doc.get("analyses", {}))
    _check_keys(asec, _ANALYSES_KEYS, "analyses")
    analyses = AnalysisFlags(
        bounds=bool(asec.get("bounds", False)),
        recurrence=bool(asec.get("recurrence", False)),
        morse=bool(asec.get("morse", False)),
        duhamel=bool(asec.get("duhamel", False)),
        eps=tuple(float(e) for e in asec.get("eps", (0.1, 0.05))),
        burn_in=None if asec.get("burn_in") is None else float(asec["burn_in"]),
        b_tilde=float(asec.get("b_tilde", 1.0)),
        forcing_gate=float(asec.get("forcing_gate", 0.2)),
        duhamel_stride=int(asec.get("duhamel_stride", 8)))
    if not (0.0 < analyses.b_tilde < 2.0):
        raise ConfigError("analyses.b_tilde must lie in (0, 2)")

    seeds = doc.get("seeds", ["zero"])
    if not isinstance(seeds, (list, tuple)) or not seeds:
        raise ConfigError("seeds must be a nonempty list")
    for s in seeds:
        _validate_seed_spec(str(s))

    osec = dict(doc.get("output", {}))
    _check_keys(osec, _OUTPUT_KEYS, "output")
    formats = tuple(osec.get("formats", ("csv",)))
    for f in formats:
        if f not in ("csv", "ndjson"):
            raise ConfigError(f"unknown output format {f!r}")

    return ScenarioConfig(model=model, forcing=forcing, integrator=integrator,
                          analyses=analyses, seeds=tuple(str(s) for s in seeds),
                          out_dir=str(osec.get("directory", "out")), formats=formats)


def _validate_seed_spec(spec: str) -> None:
    head = spec.split(":", 1)[0]
    if head not in ("zero", "equilibrium", "mode", "random"):
        raise ConfigError(f"unknown seed spec {spec!r}")
    if head in ("equilibrium", "mode", "random") and ":" not in spec:
        raise ConfigError(f"seed spec {spec!r} needs arguments after ':'")


def make_seed_field(spec: str, domain: DomainSpec, equilibria=None,
                    base_seed: int = 0) -> SpectralField:
    """Materialize a seed spec: zero | equilibrium:<id> | mode:<k,amp> | random:<seed,scale>."""
    from .spectral import random_field, zero_field

    if spec == "zero":
        return zero_field(domain)
    head, _, arg = spec.partition(":")
    if head == "mode":
        parts = arg.split(",")
        k = int(parts[0])
        amp = float(parts[1]) if len(parts) > 1 else 1.0
        return mode_field(domain, k, amp)
    if head == "random":
        parts = arg.split(",")
        seed = int(base_seed) if parts[0] in ("*", "auto") else int(parts[0])
        scale = float(parts[1]) if len(parts) > 1 else 0.3
        return random_field(domain, np.random.default_rng(seed), scale=scale)
    if head == "equilibrium":
        if not equilibria:
            raise ConfigError("no equilibrium inventory available for seed " + spec)
        return _pick_equilibrium(arg, equilibria).state
    raise ConfigError(f"unknown seed spec {spec!r}")


def _pick_equilibrium(ident: str, equilibria):
    """id is an inventory index, or one of zero|min|plus|minus."""
    if ident.isdigit():
        i = int(ident)
        if i >= len(equilibria):
            raise ConfigError(f"equilibrium index {i} out of range")
        return equilibria[i]
    nontrivial = [e for e in equilibria if e.state.l2() > 1e-8]
    if ident == "zero":
        for e in equilibria:
            if e.state.l2() <= 1e-8:
                return e
        raise ConfigError("no zero equilibrium in the inventory")
    if ident == "min":
        if not nontrivial:
            raise ConfigError("no nontrivial equilibrium found")
        return min(nontrivial, key=lambda e: e.V)
    if ident in ("plus", "minus"):
        sign = 1.0 if ident == "plus" else -1.0
        cands = [e for e in nontrivial
                 if sign * e.state.coeffs.ravel()[_first_active(e)] > 0]
        if not cands:
            raise ConfigError(f"no {ident}-signed equilibrium found")
        return min(cands, key=lambda e: e.V)
    raise ConfigError(f"unknown equilibrium id {ident!r}")


def _first_active(e) -> int:
    c = np.abs(e.state.coeffs.ravel())
    return int(np.argmax(c))


def serialize_config(cfg: ScenarioConfig) -> dict:
    f = cfg.forcing
    fdoc = {"kind": f.kind}
    if f.kind != "zero":
        fdoc["components"] = [
            {"amplitude": c.amplitude, "frequency": c.frequency,
             "phase": c.phase, "profile": _profile_to_json(c.profile)}
            for c in f.components]
    a = cfg.analyses
    return {
        "model": {"kind": cfg.model.kind, "a": cfg.model.a, "b": cfg.model.b},
        "domain": {"dimension": cfg.domain.dimension,
                   "lengths": list(cfg.domain.lengths),
                   "modes": list(cfg.domain.modes)},
        "forcing": fdoc,
        "integrator": {"dt": cfg.integrator.dt, "scheme": cfg.integrator.scheme,
                       "t_end": cfg.integrator.t_end,
                       "record_every": cfg.integrator.record_every,
                       "padded": cfg.integrator.padded},
        "analyses": {"bounds": a.bounds, "recurrence": a.recurrence,
                     "morse": a.morse, "duhamel": a.duhamel,
                     "eps": list(a.eps), "burn_in": a.burn_in,
                     "b_tilde": a.b_tilde, "forcing_gate": a.forcing_gate,
                     "duhamel_stride": a.duhamel_stride},
        "seeds": list(cfg.seeds),
        "output": {"directory": cfg.out_dir, "formats": list(cfg.formats)},
    }


def load_config(path) -> ScenarioConfig:
    with open(path) as f:
        try:
            doc = json.load(f)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"invalid JSON in {path}: {exc}") from exc
    return parse_config(doc)


def config_hash(cfg: ScenarioConfig) -> str:
    canon = json.dumps(serialize_config(cfg), sort_keys=True)
    return hashlib.sha256(canon.encode()).hexdigest()

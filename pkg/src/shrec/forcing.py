"""Finitely parameterized recurrent forcings and the shift-flow metric.

A forcing is a finite sum A_i * cos(w_i (t + offset) + phi_i) * profile_i
with fixed spatial profiles. Periodic and quasi-periodic sums of this kind
are recurrent, the time shift acts on them exactly through the offset, and
their sup norm over all time has a certifiable upper bound.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from .spectral import DomainSpec, SpectralField

__all__ = [
    "ForcingComponent",
    "ForcingModel",
    "BebutovConfig",
    "evaluate",
    "shift",
    "sup_bound",
    "bebutov_distance",
    "almost_period_scan",
    "zero_forcing",
]

FORCING_KINDS = ("zero", "periodic", "quasiperiodic")


@dataclass(frozen=True)
class ForcingComponent:
    amplitude: float
    frequency: float  # rad / time
    phase: float
    profile: SpectralField


@dataclass(frozen=True)
class ForcingModel:
    kind: str
    components: tuple[ForcingComponent, ...] = ()
    phase_offset: float = 0.0  # carries the exact shift action
    zero_domain: DomainSpec | None = None  # domain carrier for the zero model

    def __post_init__(self):
        if self.kind not in FORCING_KINDS:
            raise ValueError(f"unknown forcing kind {self.kind!r}")
        object.__setattr__(self, "components", tuple(self.components))
        if self.kind == "zero" and self.components:
            raise ValueError("zero forcing takes no components")
        if self.kind != "zero" and not self.components:
            raise ValueError(f"{self.kind} forcing needs at least one component")
        if self.kind == "quasiperiodic":
            freqs = [c.frequency for c in self.components]
            if len(freqs) < 2:
                raise ValueError("quasiperiodic forcing needs >= 2 components")
            for i in range(len(freqs)):
                for j in range(i + 1, len(freqs)):
                    if _ratio_is_rational(freqs[i], freqs[j]):
                        raise ValueError(
                            f"frequencies {freqs[i]} and {freqs[j]} fail the "
                            "rational-independence gate")
        domains = {c.profile.domain for c in self.components}
        if len(domains) > 1:
            raise ValueError("all profiles must share one domain")

    @property
    def domain(self) -> DomainSpec | None:
        if self.components:
            return self.components[0].profile.domain
        return self.zero_domain

    def period_estimate(self) -> float:
        """Largest relevant (quasi-)period: component periods and pairwise beats."""
        if not self.components:
            return 0.0
        periods = []
        freqs = [abs(c.frequency) for c in self.components]
        for w in freqs:
            if w > 0:
                periods.append(2 * math.pi / w)
        for i in range(len(freqs)):
            for j in range(i + 1, len(freqs)):
                beat = abs(freqs[i] - freqs[j])
                if beat > 0:
                    periods.append(2 * math.pi / beat)
        return max(periods, default=0.0)


def _ratio_is_rational(w1: float, w2: float, max_den: int = 1000, tol: float = 1e-12) -> bool:
    """Continued-fraction gate: ratio matches a convergent with denominator <= max_den."""
    if w2 == 0 or w1 == 0:
        return True
    x = abs(w1 / w2)
    # walk the continued-fraction convergents of x
    p0, q0, p1, q1 = 0, 1, 1, 0
    r = x
    for _ in range(64):
        a = math.floor(r)
        p0, q0, p1, q1 = p1, q1, a * p1 + p0, a * q1 + q0
        if q1 > max_den:
            return False
        if abs(x - p1 / q1) < tol:
            return True
        frac = r - a
        if frac <= 1e-15:
            return True  # terminated: exactly rational
        r = 1.0 / frac
    return False


def zero_forcing(domain: DomainSpec | None = None) -> ForcingModel:
    return ForcingModel(kind="zero", zero_domain=domain)


@dataclass(frozen=True)
class BebutovConfig:
    """Truncation and time-sampling density for the shift-flow metric."""

    trunc: int = 20
    samples_per_unit: int = 16

    def __post_init__(self):
        if self.trunc < 1:
            raise ValueError("trunc must be >= 1")
        if self.samples_per_unit < 4:
            raise ValueError("samples_per_unit must be >= 4")


# ---------------------------------------------------------------------------
# operations

def evaluate(g: ForcingModel, t: float, domain: DomainSpec | None = None) -> SpectralField:
    """Field value of the forcing at time t.

    The zero model carries no profiles; pass the target domain (or construct
    it with zero_forcing(domain)).
    """
    dom = g.domain or domain
    if dom is None:
        raise ValueError("forcing has no domain; pass one explicitly")
    coeffs = np.zeros(dom.modes)
    for c in g.components:
        coeffs = coeffs + (
            c.amplitude * math.cos(c.frequency * (t + g.phase_offset) + c.phase)
        ) * c.profile.coeffs
    return SpectralField(coeffs, dom)


def evaluate_coeffs(g: ForcingModel, t) -> np.ndarray:
    """Coefficient array(s) at scalar or vector time t; vector t adds a leading axis."""
    t = np.asarray(t, dtype=float)
    out = np.zeros(t.shape + tuple(g.domain.modes))
    for c in g.components:
        osc = c.amplitude * np.cos(c.frequency * (t + g.phase_offset) + c.phase)
        out = out + np.multiply.outer(osc, c.profile.coeffs)
    return out


def shift(g: ForcingModel, tau: float) -> ForcingModel:
    """Exact shift action: the returned model evaluates as g at time t + tau."""
    if g.kind == "zero":
        return g
    return replace(g, phase_offset=g.phase_offset + tau)


def sup_bound(g: ForcingModel, attained_scan: bool = False,
              scan_horizon: float = 1e4, scan_points: int = 200001):
    """Upper bound sum_i |A_i| ||profile_i|| for sup_t of the forcing norm.

    Returns (bound, flag) with flag "attained" when the bound is provably hit
    (single component, or a dense scan got within 0.1% when requested),
    else "upper_bound".
    """
    if g.kind == "zero" or not g.components:
        return 0.0, "attained"
    bound = sum(abs(c.amplitude) * c.profile.l2() for c in g.components)
    if len(g.components) == 1:
        return bound, "attained"
    if attained_scan:
        ts = np.linspace(0.0, scan_horizon, scan_points)
        vals = _norm_track(g, ts)
        if vals.max() >= bound * 0.999:
            return bound, "attained"
    return bound, "upper_bound"


def _norm_track(g: ForcingModel, ts: np.ndarray) -> np.ndarray:
    """||g(t)|| for a vector of times, without materializing full fields."""
    if not g.components:
        return np.zeros(len(ts))
    dom = g.domain
    scale = np.prod([l / 2.0 for l in dom.lengths])
    profiles = np.stack([c.profile.coeffs.ravel() for c in g.components])
    gram = scale * (profiles @ profiles.T)
    osc = np.stack([
        c.amplitude * np.cos(c.frequency * (ts + g.phase_offset) + c.phase)
        for c in g.components
    ])
    sq = np.einsum("it,ij,jt->t", osc, gram, osc)
    return np.sqrt(np.maximum(sq, 0.0))


def _diff_track(g1: ForcingModel, g2: ForcingModel, ts: np.ndarray) -> np.ndarray:
    """||g1(t) - g2(t)|| on a time grid.

    The difference is accumulated in coefficient space before taking norms,
    so nearly identical forcings cancel linearly instead of inside a
    quadratic form (which would cost half the digits).
    """
    comps = []
    for sgn, g in ((1.0, g1), (-1.0, g2)):
        for c in g.components:
            comps.append((sgn * c.amplitude, c.frequency, c.phase, g.phase_offset, c.profile))
    if not comps:
        return np.zeros(len(ts))
    dom = comps[0][4].domain
    scale = np.prod([l / 2.0 for l in dom.lengths])
    diff = np.zeros((len(ts),) + tuple(dom.modes))
    for a, w, ph, off, profile in comps:
        osc = a * np.cos(w * (ts + off) + ph)
        diff += np.multiply.outer(osc, profile.coeffs)
    sq = scale * np.sum(diff.reshape(len(ts), -1) ** 2, axis=1)
    return np.sqrt(sq)


def bebutov_distance(g1: ForcingModel, g2: ForcingModel,
                     cfg: BebutovConfig = BebutovConfig()) -> float:
    """Truncated shift-flow metric sum_n 2^-n D_n/(1+D_n), D_n = max_{|t|<=n} ||g1-g2||.

    The max is taken on a sampling grid; the value is nondecreasing in trunc
    and bounded by 1. Truncating at n_max discards at most 2^-n_max.
    """
    if g1.domain is not None and g2.domain is not None and g1.domain != g2.domain:
        raise ValueError("forcings live on different domains")
    total = 0.0
    d_prev = 0.0
    for n in range(1, cfg.trunc + 1):
        lo, hi = n - 1, n
        m = max(2, int(round(cfg.samples_per_unit * (hi - lo))) + 1)
        ts = np.linspace(lo, hi, m)
        ts = np.concatenate([-ts[::-1], ts])
        d_new = float(_diff_track(g1, g2, ts).max())
        d_prev = max(d_prev, d_new)
        total += (0.5**n) * d_prev / (1.0 + d_prev)
    return total


def almost_period_scan(g: ForcingModel, eps: float, window: float, horizon: float):
    """Grid shifts tau in [0, horizon] with max_{|t|<=window} ||g(t+tau)-g(t)|| < eps.

    An empty list means no almost period was found at this eps within the
    horizon; that is a report, not an error.
    """
    if eps <= 0:
        raise ValueError("eps must be positive")
    if horizon <= window:
        raise ValueError("horizon must exceed window")
    if g.kind == "zero" or not g.components:
        step = 1.0 / BebutovConfig().samples_per_unit
        return list(np.arange(0.0, horizon + step / 2, step))
    cfg = BebutovConfig()
    n_t = max(2, int(round(2 * window * cfg.samples_per_unit)) + 1)
    ts = np.linspace(-window, window, n_t)
    step = 1.0 / cfg.samples_per_unit
    taus = np.arange(0.0, horizon + step / 2, step)
    out = []
    for tau in taus:
        worst = float(_diff_track(shift(g, tau), g, ts).max())
        if worst < eps:
            out.append(float(tau))
    return out

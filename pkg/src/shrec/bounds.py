"""Closed-form a-priori constants and empirical absorbing-set checks.

The dissipation estimate for the model couples the forcing sup bound with a
scalar concave function of the squared norm; its exact maximizer gives the
radius of a forward-absorbing ball. Trajectory checks verify the discrete
forms of the differential and integrated inequalities on recorded samples.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .dynamics import Trajectory

__all__ = [
    "AprioriConstants",
    "BoundReport",
    "compute_R0",
    "verify_energy_inequality",
    "verify_absorbing",
    "verify_h2_regularization",
]

L4_EXPONENT_VARIANTS = {
    # exponent p in the quartic penalty s^2 / |Omega|^p entering the scalar sup
    "sqrt": 0.5,            # default bookkeeping (see module docs)
    "cauchy_schwarz": 1.0,  # strict Cauchy-Schwarz: ||u||^2 <= |O|^(1/2) ||u||_{L4}^2
    "measure": 2.0,         # the coarser ||u||^2 <= |O| ||u||_{L4}^2 reading
}


@dataclass(frozen=True)
class AprioriConstants:
    a: float
    b_tilde: float
    M: float
    omega_measure: float
    R0: float
    forcing_term: float        # M^2/2 contribution to R0^2
    poly_sup_term: float       # scalar-sup contribution to R0^2
    linear_coeff: float        # 12 - 2a, clipped at 0
    quartic_coeff: float       # (1/2)(4 - b_tilde^2) / |Omega|^p
    variant: str = "sqrt"

    @property
    def R0_squared(self) -> float:
        return self.forcing_term + self.poly_sup_term


@dataclass(frozen=True)
class BoundReport:
    inequality: str
    max_violation: float
    margin_min: float
    applicable: bool
    note: str = ""
    extras: tuple = ()

    def row(self) -> dict:
        return {"inequality": self.inequality, "max_violation": self.max_violation,
                "margin_min": self.margin_min, "applicable": self.applicable}


def scalar_sup_integrand(s, linear_coeff: float, quartic_coeff: float):
    """The concave scalar target (12-2a) s - q s^2 maximized by compute_R0."""
    s = np.asarray(s, dtype=float)
    return linear_coeff * s - quartic_coeff * s * s


def compute_R0(a: float, b_tilde: float, M: float, omega_measure: float,
               variant: str = "sqrt") -> AprioriConstants:
    """Absorbing radius: R0^2 = M^2/2 + sup_{s>=0} [(12-2a) s - q s^2].

    q = (1/2)(4 - b_tilde^2)/|Omega|^p with p chosen by `variant`; the sup is
    (12-2a)_+^2/(4 q), which for the default variant reads
    (12-2a)_+^2 sqrt(|Omega|) / (2 (4 - b_tilde^2)). The breakdown of both
    contributions is retained on the result.
    """
    if not (0.0 < b_tilde < 2.0):
        raise ValueError("coercivity lost: b_tilde must lie in (0, 2)")
    if M < 0:
        raise ValueError("forcing bound M must be nonnegative")
    if omega_measure <= 0:
        raise ValueError("omega_measure must be positive")
    if variant not in L4_EXPONENT_VARIANTS:
        raise ValueError(f"unknown variant {variant!r}")
    p = L4_EXPONENT_VARIANTS[variant]
    linear = max(12.0 - 2.0 * a, 0.0)
    quartic = 0.5 * (4.0 - b_tilde**2) / omega_measure**p
    forcing_term = 0.5 * M * M
    poly_sup = linear**2 / (4.0 * quartic)
    return AprioriConstants(a=a, b_tilde=b_tilde, M=M, omega_measure=omega_measure,
                            R0=float(np.sqrt(forcing_term + poly_sup)),
                            forcing_term=forcing_term, poly_sup_term=poly_sup,
                            linear_coeff=linear, quartic_coeff=quartic,
                            variant=variant)


def _slack(traj: Trajectory) -> float:
    """Additive discretization slack 10 dt (1 + max ||u||^2)."""
    return 10.0 * traj.dt * (1.0 + float(np.max(traj.l2) ** 2))


def _applicability(traj: Trajectory, consts: AprioriConstants,
                   forcing_sup: float | None) -> str | None:
    if abs(traj.model.b) > consts.b_tilde + 1e-15:
        return f"|b|={abs(traj.model.b):g} exceeds b_tilde={consts.b_tilde:g}"
    if forcing_sup is not None and forcing_sup > consts.M + 1e-12:
        return f"forcing sup {forcing_sup:g} exceeds M={consts.M:g}"
    return None


def verify_energy_inequality(traj: Trajectory, consts: AprioriConstants,
                             forcing_sup: float | None = None) -> BoundReport:
    """Discrete differential inequality: Dq(||u||^2) + ||u||^2 + ||lap u||^2 < R0^2.

    The forward-difference quotient is evaluated on consecutive recorded
    samples with left-endpoint norms; violations are reported against R0^2
    plus the discretization slack.
    """
    why = _applicability(traj, consts, forcing_sup)
    if why is not None:
        return BoundReport("4.10", 0.0, 0.0, False, note="inapplicable: " + why)
    s = traj.l2**2
    h = traj.h2**2
    ds = np.diff(traj.times)
    # trapezoid-consistent discrete form: the forward quotient approximates the
    # derivative at the interval midpoint, so the norms are averaged there too
    # (left-endpoint norms would bias the check upward on stiff transients)
    lhs = np.diff(s) / ds + 0.5 * (s[:-1] + s[1:]) + 0.5 * (h[:-1] + h[1:])
    margin = consts.R0_squared + _slack(traj) - lhs
    return BoundReport("4.10",
                       max_violation=float(np.maximum(-margin, 0.0).max(initial=0.0)),
                       margin_min=float(margin.min(initial=np.inf)),
                       applicable=True)


def verify_absorbing(traj: Trajectory, consts: AprioriConstants,
                     forcing_sup: float | None = None,
                     pair_stride: int = 1) -> BoundReport:
    """Integrated inequality on sample pairs: the R0-ball absorbs forward orbits.

    Checks ||u(t)||^2 <= exp(tau-t) ||u(tau)||^2 + R0^2 (1 - exp(tau-t)) + slack
    over recorded pairs tau < t, and reports the first entry time into the
    R0-ball among the extras.
    """
    why = _applicability(traj, consts, forcing_sup)
    if why is not None:
        return BoundReport("4.11", 0.0, 0.0, False, note="inapplicable: " + why)
    s = traj.l2**2
    t = traj.times
    R2 = consts.R0_squared
    slack = _slack(traj)
    worst = -np.inf
    m = len(t)
    idx = np.arange(0, m, pair_stride)
    for i in idx:
        e = np.exp(t[i] - t[i + 1:])
        rhs = e * s[i] + R2 * (1.0 - e) + slack
        viol = s[i + 1:] - rhs
        if viol.size:
            worst = max(worst, float(viol.max()))
    inside = np.nonzero(s <= R2)[0]
    entry = float(t[inside[0]]) if inside.size else np.nan
    return BoundReport("4.11",
                       max_violation=float(max(worst, 0.0)),
                       margin_min=float(-worst) if np.isfinite(worst) else np.inf,
                       applicable=True,
                       extras=(("ball_entry_time", entry),))


def verify_h2_regularization(traj: Trajectory, dwell_fraction: float = 0.1) -> BoundReport:
    """Empirical smoothing check: ||lap u|| stays on a finite plateau after a dwell.

    The analytic constant hiding behind this bound is not computed; the
    fitted plateau value is a regression anchor across code versions.
    """
    t0 = traj.times[0] + max(1.0, dwell_fraction * traj.horizon)
    tail = traj.h2[traj.times >= t0 - 1e-12]
    if tail.size == 0:
        tail = traj.h2[-1:]
    plateau = float(tail.max(initial=0.0))
    finite = bool(np.all(np.isfinite(tail)))
    return BoundReport("h2_regularization",
                       max_violation=0.0 if finite else np.inf,
                       margin_min=0.0,
                       applicable=True,
                       note=f"plateau={plateau:.6g} after dwell t>={t0:.6g}",
                       extras=(("plateau", plateau), ("dwell_start", float(t0))))


def write_bounds_csv(path, reports) -> None:
    with open(path, "w", newline="\n") as f:
        f.write("inequality,max_violation,margin_min,applicable\n")
        for r in reports:
            f.write(f"{r.inequality},{r.max_violation:.17g},{r.margin_min:.17g},"
                    f"{int(r.applicable)}\n")

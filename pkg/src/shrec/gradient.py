"""Autonomous backbone: Lyapunov function, equilibria, and Morse structure.

With the symmetry-breaking gradient term switched off, the semiflow is
gradient: V(u) = (1/2)(L(a)u, u) + (1/4) Int u^4 decreases along orbits at
rate ||L(a)u + u^3||^2, every converged equilibrium satisfies
V(e) = -(1/4) Int e^4, and the attractor decomposes into the set of
negative-V equilibria (with their connections) below the origin.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .dynamics import IntegratorConfig, ModelSpec, integrate
from .forcing import zero_forcing
from .spectral import (
    DomainSpec,
    OperatorSpectrum,
    SpectralField,
    build_spectrum,
    cubic_coeffs,
    gradient_square_coeffs,
    lambda_ladder,
    mode_field,
    random_field,
    to_grid,
    zero_field,
    PAD_FACTOR,
    _grid_weight,
)

__all__ = [
    "Equilibrium",
    "MorseReport",
    "lyapunov",
    "lyapunov_value",
    "dissipation",
    "residual_coeffs",
    "jacobian",
    "find_equilibria",
    "default_seeds",
    "morse_index_zero",
    "marginal_modes",
    "equilibrium_identity",
    "morse_decomposition",
]

NEWTON_TOL = 1e-10
NEWTON_MAX_ITER = 50
NEWTON_MAX_HALVINGS = 20
MARGINAL_TOL = 1e-9
CLUSTER_TOL = 1e-3


def _quad_power(u: SpectralField, p: int) -> float:
    """Int u^p by padded-grid quadrature (exact for p <= 4 at this padding)."""
    g = to_grid(u, pad=PAD_FACTOR)
    w = _grid_weight(u.domain, g.shape)
    return float(w * np.sum(g**p))


def _mode_lambda(domain: DomainSpec, a: float) -> np.ndarray:
    mu = domain.mode_mu()
    return mu * mu - 2.0 * mu + a


def lyapunov(u: SpectralField, a: float) -> float:
    """V(u) = (1/2) sum lambda_k(a) (mode energy) + (1/4) Int u^4."""
    lam = _mode_lambda(u.domain, a)
    scale = np.prod([l / 2.0 for l in u.domain.lengths])
    quad = 0.5 * scale * np.sum(lam * u.coeffs**2)
    return float(quad + 0.25 * _quad_power(u, 4))


def lyapunov_value(u: SpectralField, a: float, kind: str = "modified_swift_hohenberg") -> float:
    """Kind-aware V: the second-order variant weighs modes by mu_k - a."""
    if kind == "modified_swift_hohenberg":
        return lyapunov(u, a)
    mu = u.domain.mode_mu()
    scale = np.prod([l / 2.0 for l in u.domain.lengths])
    quad = 0.5 * scale * np.sum((mu - a) * u.coeffs**2)
    return float(quad + 0.25 * _quad_power(u, 4))


def residual_coeffs(u: SpectralField, a: float, b: float,
                    kind: str = "modified_swift_hohenberg") -> np.ndarray:
    """Stationary residual F(u) = L(a)u + b|grad u|^2 + u^3, projected."""
    if kind == "modified_swift_hohenberg":
        out = _mode_lambda(u.domain, a) * u.coeffs + cubic_coeffs(u)
        if b != 0.0:
            out = out + b * gradient_square_coeffs(u)
        return out
    mu = u.domain.mode_mu()
    return (mu - a) * u.coeffs + cubic_coeffs(u)


def _field_norm(domain: DomainSpec, coeffs: np.ndarray) -> float:
    scale = np.prod([l / 2.0 for l in domain.lengths])
    return float(np.sqrt(scale * np.sum(coeffs**2)))


def dissipation(u: SpectralField, a: float) -> float:
    """-||L(a)u + u^3||^2; equals dV/dt along the gradient-term-free flow."""
    r = residual_coeffs(u, a, 0.0)
    return -_field_norm(u.domain, r) ** 2


def jacobian(u: SpectralField, a: float, b: float,
             kind: str = "modified_swift_hohenberg") -> np.ndarray:
    """Dense Jacobian of the stationary residual in coefficient space.

    Columns are exact directional derivatives assembled through the same
    de-aliased product machinery as the residual itself.
    """
    dom = u.domain
    n = int(np.prod(dom.modes))
    lam = (_mode_lambda(dom, a) if kind == "modified_swift_hohenberg"
           else dom.mode_mu() - a).ravel()
    J = np.diag(lam)

    # cubic part: 3 P(u^2 v) for unit directions v, batched over columns
    g = to_grid(u, pad=PAD_FACTOR)
    u2 = g * g
    if dom.dimension == 1:
        m = u2.shape[0]
        basis = _sine_matrix(m, dom.modes[0])          # (m, N) values of each mode
        prod = 3.0 * u2[:, None] * basis
        from scipy.fft import dst

        cols = dst(prod, type=1, axis=0)[: dom.modes[0]] / (m + 1)
        J += cols
    else:
        from scipy.fft import dstn

        for j in range(n):
            e = np.zeros(n); e[j] = 1.0
            v = SpectralField(e.reshape(dom.modes), dom)
            gv = to_grid(v, pad=PAD_FACTOR)
            col = dstn(3.0 * u2 * gv, type=1)
            for ax, npts in enumerate(col.shape):
                col = np.moveaxis(np.moveaxis(col, ax, 0) / (npts + 1), 0, ax)
            J[:, j] += col[tuple(slice(0, k) for k in dom.modes)].ravel()

    if kind == "modified_swift_hohenberg" and b != 0.0:
        J += b * _gradient_jacobian(u)
    return J


def _sine_matrix(m: int, n_modes: int) -> np.ndarray:
    j = np.arange(1, m + 1)[:, None]
    k = np.arange(1, n_modes + 1)[None, :]
    return np.sin(np.pi * j * k / (m + 1))


def _gradient_jacobian(u: SpectralField) -> np.ndarray:
    """d/dv of P|grad u|^2: columns 2 P(grad u . grad v) per unit direction."""
    from .spectral import _cos_series_product, _cos_to_sin_matrix, _derivative_cos_coeffs

    dom = u.domain
    if dom.dimension != 1:
        raise NotImplementedError("gradient-term Jacobian is 1-D only")
    n = dom.modes[0]
    d = _derivative_cos_coeffs(u.coeffs, dom.lengths[0])
    P = _cos_to_sin_matrix(n, 2 * n + 1)
    G = np.empty((n, n))
    for mcol in range(1, n + 1):
        e = np.zeros(n); e[mcol - 1] = 1.0
        de = _derivative_cos_coeffs(e, dom.lengths[0])
        G[:, mcol - 1] = 2.0 * (P @ _cos_series_product(d, de))
    return G


@dataclass(frozen=True)
class Equilibrium:
    state: SpectralField
    residual: float
    V: float
    spectrum: tuple[tuple[float, int], ...]   # (eigenvalue, multiplicity)
    unstable_dim: int
    label: str = ""

    def to_record(self) -> dict:
        return {
            "label": self.label,
            "residual": self.residual,
            "V": self.V,
            "unstable_dim": self.unstable_dim,
            "spectrum": [[lam, m] for lam, m in self.spectrum],
            "l2": self.state.l2(),
            "coeffs": [float(c) for c in self.state.coeffs.ravel()],
        }


def _group_eigenvalues(vals: np.ndarray, tol: float = 1e-8):
    vals = np.sort(vals)
    groups: list[list[float]] = []
    for v in vals:
        if groups and abs(v - groups[-1][-1]) <= tol * (1 + abs(v)):
            groups[-1].append(v)
        else:
            groups.append([v])
    return tuple((float(np.mean(g)), len(g)) for g in groups)


def _linearization_spectrum(u: SpectralField, a: float, b: float, kind: str):
    J = jacobian(u, a, b, kind)
    if b == 0.0 or kind == "chafee_infante":
        vals = np.linalg.eigvalsh(0.5 * (J + J.T))
    else:
        vals = np.real(np.linalg.eigvals(J))
    spectrum = _group_eigenvalues(vals)
    unstable = int(np.sum(vals < -MARGINAL_TOL))
    return spectrum, unstable


def _newton(u0: SpectralField, a: float, b: float, kind: str,
            newton_tol: float, max_iter: int = NEWTON_MAX_ITER):
    """Damped Newton on coefficients; returns (field, residual) or None."""
    dom = u0.domain
    c = u0.coeffs.copy()
    r = residual_coeffs(SpectralField(c, dom), a, b, kind)
    rn = _field_norm(dom, r)
    for _ in range(max_iter):
        if rn <= newton_tol:
            return SpectralField(c, dom), rn
        J = jacobian(SpectralField(c, dom), a, b, kind)
        try:
            delta = np.linalg.solve(J, -r.ravel()).reshape(dom.modes)
        except np.linalg.LinAlgError:
            return None
        lam = 1.0
        for _ in range(NEWTON_MAX_HALVINGS):
            cand = c + lam * delta
            rc = residual_coeffs(SpectralField(cand, dom), a, b, kind)
            rcn = _field_norm(dom, rc)
            if rcn < rn:
                break
            lam *= 0.5
        else:
            return None
        c, r, rn = cand, rc, rcn
    if rn <= newton_tol:
        return SpectralField(c, dom), rn
    return None


def single_mode_amplitude(lam_k: float) -> float | None:
    """One-mode truncation root: lam c + (3/4) c^3 = 0 for the cubic term."""
    if lam_k >= 0:
        return None
    return float(np.sqrt(-4.0 * lam_k / 3.0))


def default_seeds(domain: DomainSpec, a: float, n_random: int = 4,
                  rng_seed: int = 7, kind: str = "modified_swift_hohenberg"):
    """Reproducible seed inventory: origin, +-single-mode predictions, random fields."""
    seeds = [("zero", zero_field(domain))]
    spectrum = build_spectrum(domain)
    ladder = lambda_ladder(spectrum, a)
    if kind == "chafee_infante":
        mu = np.asarray(spectrum.mu)
        lam_entries = list(zip((mu - a).tolist(), spectrum.multiplicity))
    else:
        lam_entries = list(ladder.entries)
    mu_dist = list(spectrum.mu)
    for (lam, _r), mu_val in zip(lam_entries, mu_dist):
        amp = single_mode_amplitude(lam)
        if amp is None:
            continue
        # seed along a single lattice mode attaining this mu level
        k = _mode_index_for_mu(domain, mu_val)
        seeds.append((f"mode+{k}", mode_field(domain, k, amp)))
        seeds.append((f"mode-{k}", mode_field(domain, k, -amp)))
    rng = np.random.default_rng(rng_seed)
    for i in range(n_random):
        seeds.append((f"random{i}", random_field(domain, rng, scale=0.5)))
    return seeds


def _mode_index_for_mu(domain: DomainSpec, mu_val: float):
    mu = domain.mode_mu()
    if domain.dimension == 1:
        k = int(np.argmin(np.abs(mu - mu_val))) + 1
        return k
    idx = np.unravel_index(int(np.argmin(np.abs(mu - mu_val))), mu.shape)
    return (idx[0] + 1, idx[1] + 1)


def find_equilibria(a: float, b: float, seeds, newton_tol: float = NEWTON_TOL,
                    kind: str = "modified_swift_hohenberg") -> list[Equilibrium]:
    """Newton-converge each seed, deduplicate, attach spectrum and V.

    seeds may be SpectralFields or (label, field) pairs. Non-convergent seeds
    are dropped (reported by the caller if desired, never fatal).
    """
    found: list[Equilibrium] = []
    for item in seeds:
        label, u0 = item if isinstance(item, tuple) else ("", item)
        res = _newton(u0, a, b, kind, newton_tol)
        if res is None:
            continue
        u, rn = res
        if any(u.distance(e.state) < 10.0 * newton_tol * max(1.0, u.l2())
               or u.distance(e.state) < 1e-6 for e in found):
            continue
        spectrum, unstable = _linearization_spectrum(u, a, b, kind)
        V = lyapunov_value(u, a, kind)
        found.append(Equilibrium(state=u, residual=rn, V=V, spectrum=spectrum,
                                 unstable_dim=unstable, label=label or f"eq{len(found)}"))
    found.sort(key=lambda e: (e.V, e.state.l2()))
    return found


def morse_index_zero(a: float, spectrum: OperatorSpectrum,
                     marginal_tol: float = MARGINAL_TOL) -> int:
    """Multiplicity-weighted count of negative ladder eigenvalues at the origin.

    Marginal levels (|lambda| <= marginal_tol) are never counted; they are
    reported by marginal_modes.
    """
    ladder = lambda_ladder(spectrum, a)
    return int(sum(r for lam, r in ladder.entries if lam < -marginal_tol))


def marginal_modes(a: float, spectrum: OperatorSpectrum,
                   marginal_tol: float = MARGINAL_TOL):
    """Ladder levels with |lambda_k(a)| <= marginal_tol, as (mu, lambda, mult)."""
    ladder = lambda_ladder(spectrum, a)
    return [(mu, lam, r) for mu, (lam, r) in zip(spectrum.mu, ladder.entries)
            if abs(lam) <= marginal_tol]


def equilibrium_identity(e: Equilibrium, b: float = 0.0) -> float:
    """Defect |V(e) + (1/4) Int e^4| of the stationary-value identity.

    Only meaningful for equilibria of the gradient-term-free equation; a b != 0
    origin is flagged by ValueError.
    """
    if b != 0.0:
        raise ValueError("identity holds only for the b = 0 equation")
    return float(abs(e.V + 0.25 * _quad_power(e.state, 4)))


@dataclass
class MorseReport:
    a: float
    b: float
    equilibria: list[Equilibrium]
    r_zero: int
    K0_members: list[int]                 # indices into equilibria
    connections: list[dict]               # {"from": i, "to": j, "seed": label}
    unclassified: int
    trivial: bool

    @property
    def min_V(self) -> float:
        return min((e.V for e in self.equilibria), default=0.0)

    def write_ndjson(self, path) -> None:
        with open(path, "w", newline="\n") as f:
            for i, e in enumerate(self.equilibria):
                rec = e.to_record()
                rec.update({"index": i, "in_K0": i in self.K0_members,
                            "a": self.a, "b": self.b})
                f.write(json.dumps(rec) + "\n")

    def summary_row(self) -> dict:
        return {"a": self.a, "b": self.b, "r_zero": self.r_zero,
                "count_K0": len(self.K0_members), "min_V": self.min_V}


def _nearest_equilibrium(u: SpectralField, equilibria, tol: float):
    dists = [u.distance(e.state) for e in equilibria]
    i = int(np.argmin(dists))
    return (i, dists[i]) if dists[i] < tol else (None, dists[i])


def morse_decomposition(a: float, b: float, sample_count: int = 6,
                        domain: DomainSpec | None = None,
                        t_end: float = 40.0, dt: float = 2e-3,
                        cluster_tol: float = CLUSTER_TOL,
                        rng_seed: int = 11) -> MorseReport:
    """Equilibrium inventory plus sampled connection evidence.

    Forward trajectories from perturbed seeds classify omega-limits by the
    nearest equilibrium; shots along the unstable directions of the origin
    provide connection evidence. Sampled connections are checked to run from
    higher to lower V (the gradient ordering).
    """
    domain = domain or DomainSpec()
    spectrum = build_spectrum(domain)
    ladder = lambda_ladder(spectrum, a)
    r_zero = morse_index_zero(a, spectrum)
    equilibria = find_equilibria(a, b, default_seeds(domain, a), kind="modified_swift_hohenberg")

    trivial = a >= -ladder.lam0
    K0 = [i for i, e in enumerate(equilibria) if e.V < -1e-12]
    zero_idx = next((i for i, e in enumerate(equilibria) if e.state.l2() < 1e-8), None)

    model = ModelSpec(kind="modified_swift_hohenberg", a=a, b=b, domain=domain)
    cfg = IntegratorConfig(dt=dt, scheme="etd_rk4", t_end=t_end,
                           record_every=max(1, int(round(0.5 / dt))))
    g0 = zero_forcing(domain)
    connections: list[dict] = []
    unclassified = 0

    def classify(seed_field, label):
        nonlocal unclassified
        traj = integrate(model, g0, seed_field, 0.0, cfg)
        if traj.error is not None:
            unclassified += 1
            return
        idx, _ = _nearest_equilibrium(traj.field(len(traj.times) - 1), equilibria, cluster_tol)
        if idx is None:
            unclassified += 1
            return
        # gradient ordering along the sampled connection (b = 0 only)
        if b == 0.0:
            V = traj.lyapunov
            if not np.all(np.diff(V) <= 1e-8 * (1.0 + np.abs(V[:-1]))):
                raise AssertionError("V increased along a sampled connection")
        src = zero_idx if label.startswith("unstable") else None
        connections.append({"from": src, "to": idx, "seed": label})

    # shots along unstable directions of the origin
    if zero_idx is not None and not trivial:
        lam_modes = _mode_lambda(domain, a).ravel()
        for j in np.nonzero(lam_modes < -MARGINAL_TOL)[0]:
            for s in (+1.0, -1.0):
                c = np.zeros(int(np.prod(domain.modes)))
                c[j] = s * 1e-3
                classify(SpectralField(c.reshape(domain.modes), domain),
                         f"unstable{j}{'+' if s > 0 else '-'}")

    rng = np.random.default_rng(rng_seed)
    for i in range(sample_count):
        classify(random_field(domain, rng, scale=0.3), f"sample{i}")

    return MorseReport(a=a, b=b, equilibria=equilibria, r_zero=r_zero,
                       K0_members=K0, connections=connections,
                       unclassified=unclassified, trivial=trivial)

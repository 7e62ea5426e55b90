"""Time integration of the forced model in mild-solution form.

The linear part (the fourth-order diagonal operator, or the Laplacian for
the second-order variant) is integrated exactly coefficientwise; the rest
of the right-hand side is treated by exponential-integrator quadrature
(ETD1, ETDRK4) or by a trapezoidal/explicit IMEX split.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np
from scipy.fft import dst

from .forcing import ForcingModel, evaluate_coeffs
from .spectral import (
    PAD_FACTOR,
    DomainSpec,
    NonfiniteFieldError,
    SpectralField,
    _cos_series_product,
    _cos_to_sin_matrix,
    cubic_coeffs,
    gradient_square_coeffs,
    norms,
    padded_size,
    to_grid,
)

__all__ = [
    "ModelSpec",
    "IntegratorConfig",
    "Trajectory",
    "StepDivergedError",
    "Stepper",
    "step",
    "integrate",
    "duhamel_residual",
    "skew_orbit",
]

MODEL_KINDS = ("modified_swift_hohenberg", "chafee_infante")
SCHEMES = ("etd1", "etd_rk4", "imex_cn")
DIVERGENCE_GRID_MAX = 1e8
PHI_TAYLOR_SWITCH = 1e-4


class StepDivergedError(RuntimeError):
    """Raised when a step produces nonfinite or absurdly large grid values."""

    def __init__(self, t: float):
        super().__init__(f"step diverged at t={t:.6g}")
        self.t = t


@dataclass(frozen=True)
class ModelSpec:
    kind: str = "modified_swift_hohenberg"
    a: float = 0.5
    b: float = 0.0  # ignored by the chafee_infante kind
    domain: DomainSpec = field(default_factory=DomainSpec)

    def __post_init__(self):
        if self.kind not in MODEL_KINDS:
            raise ValueError(f"unknown model kind {self.kind!r}")


@dataclass(frozen=True)
class IntegratorConfig:
    dt: float = 1e-3
    scheme: str = "etd_rk4"
    t_end: float = 200.0
    record_every: int = 50
    padded: bool = True

    def __post_init__(self):
        if self.dt <= 0:
            raise ValueError("dt must be positive")
        if self.scheme not in SCHEMES:
            raise ValueError(f"unknown scheme {self.scheme!r}")
        if self.record_every < 1:
            raise ValueError("record_every must be >= 1")


@dataclass
class Trajectory:
    """Recorded samples of one integration, immutable once assembled."""

    model: ModelSpec
    times: np.ndarray                 # (m,)
    coeffs: np.ndarray                # (m, *modes)
    l2: np.ndarray
    l4: np.ndarray
    l6: np.ndarray
    h2: np.ndarray
    lyapunov: np.ndarray              # V along the run (autonomous-backbone value)
    fingerprint: np.ndarray           # phase offset of the shifted forcing
    dt: float
    record_every: int
    error: str | None = None          # "step diverged" tag when truncated

    def __post_init__(self):
        for name in ("times", "coeffs", "l2", "l4", "l6", "h2", "lyapunov", "fingerprint"):
            arr = np.asarray(getattr(self, name))
            arr.setflags(write=False)
            setattr(self, name, arr)
        if len(self.times) > 1 and not np.all(np.diff(self.times) > 0):
            raise ValueError("times must be strictly increasing")

    @property
    def sample_dt(self) -> float:
        return self.dt * self.record_every

    @property
    def horizon(self) -> float:
        return float(self.times[-1] - self.times[0])

    def field(self, i: int) -> SpectralField:
        return SpectralField(self.coeffs[i], self.model.domain)

    def write_csv(self, path) -> None:
        """Columns t, l2, l4, h2, V, fingerprint; 17 significant digits."""
        with open(path, "w", newline="\n") as f:
            f.write("t,l2,l4,h2,V,fingerprint\n")
            for i in range(len(self.times)):
                row = (self.times[i], self.l2[i], self.l4[i], self.h2[i],
                       self.lyapunov[i], self.fingerprint[i])
                f.write(",".join(f"{x:.17g}" for x in row) + "\n")

    def write_ndjson(self, path) -> None:
        """One record per sample: {"t": ..., "coeffs": [...]}."""
        with open(path, "w", newline="\n") as f:
            for i in range(len(self.times)):
                rec = {"t": float(self.times[i]),
                       "coeffs": [float(c) for c in self.coeffs[i].ravel()]}
                f.write(json.dumps(rec) + "\n")


# ---------------------------------------------------------------------------
# phi functions (stable near 0 via Taylor, per the configured switch)

def _phi1(z: np.ndarray) -> np.ndarray:
    z = np.asarray(z, dtype=float)
    small = np.abs(z) < PHI_TAYLOR_SWITCH
    zs = np.where(small, 1.0, z)
    out = np.expm1(zs) / zs
    taylor = 1.0 + z / 2.0 + z**2 / 6.0 + z**3 / 24.0
    return np.where(small, taylor, out)


def _phi2(z: np.ndarray) -> np.ndarray:
    z = np.asarray(z, dtype=float)
    small = np.abs(z) < PHI_TAYLOR_SWITCH
    zs = np.where(small, 1.0, z)
    out = (np.expm1(zs) - zs) / zs**2
    taylor = 0.5 + z / 6.0 + z**2 / 24.0 + z**3 / 120.0
    return np.where(small, taylor, out)


def _phi3(z: np.ndarray) -> np.ndarray:
    z = np.asarray(z, dtype=float)
    small = np.abs(z) < PHI_TAYLOR_SWITCH
    zs = np.where(small, 1.0, z)
    out = (np.expm1(zs) - zs - zs**2 / 2.0) / zs**3
    taylor = 1.0 / 6.0 + z / 24.0 + z**2 / 120.0 + z**3 / 720.0
    return np.where(small, taylor, out)


def _phi_ladder(z: np.ndarray, k_max: int) -> list[np.ndarray]:
    """phi_1..phi_k, series for |z| <= 2 (the recurrence loses a factor ~1/|z|
    of accuracy per level there), recurrence phi_{k+1} = (phi_k - 1/k!)/z else."""
    import math

    z = np.asarray(z, dtype=float)
    small = np.abs(z) <= 5.0
    zs = np.where(small, 1.0, z)
    phis = []
    prev = np.expm1(zs) / zs
    fact = 1.0
    for k in range(1, k_max + 1):
        series = np.zeros_like(z)
        term = np.ones_like(z) / math.factorial(k)
        series += term
        for j in range(1, 40):
            term = term * z / (j + k)
            series += term
        phis.append(np.where(small, series, prev))
        fact *= k
        prev = (prev - 1.0 / fact) / zs
    return phis


# ---------------------------------------------------------------------------
# stepper

class Stepper:
    """Precomputed exponential factors and tableau weights for one (model, dt).

    split_a moves the full constant-coefficient operator (including the 2*lap
    and a terms) into the exact exponential; it exists for linear-decay tests
    only. include_nonlinear=False drops the nonlinear terms (and the forcing
    stays), used by the exactness tests.
    """

    def __init__(self, model: ModelSpec, dt: float, scheme: str = "etd_rk4",
                 padded: bool = True, split_a: bool = False,
                 include_nonlinear: bool = True, mode_mask: np.ndarray | None = None):
        if scheme not in SCHEMES:
            raise ValueError(f"unknown scheme {scheme!r}")
        self.model = model
        self.dt = float(dt)
        self.scheme = scheme
        self.padded = padded
        self.split_a = split_a
        self.include_nonlinear = include_nonlinear
        self.mode_mask = mode_mask
        dom = model.domain
        mu = dom.mode_mu()
        self.mu = mu
        if model.kind == "modified_swift_hohenberg":
            lin = mu * mu
            if split_a:
                lin = mu * mu - 2.0 * mu + model.a
        else:  # chafee_infante: second-order linear part
            lin = mu.copy()
            if split_a:
                lin = mu - model.a
        self.lin = lin
        z = -lin * self.dt
        self.exp_full = np.exp(z)
        self.exp_half = np.exp(z / 2.0)
        if scheme == "etd_rk4":
            self.f0 = (self.dt / 2.0) * _phi1(z / 2.0)
            p1, p2, p3 = _phi1(z), _phi2(z), _phi3(z)
            self.f1 = self.dt * (p1 - 3.0 * p2 + 4.0 * p3)
            self.f2 = self.dt * (p2 - 2.0 * p3)
            self.f3 = self.dt * (4.0 * p3 - p2)
        elif scheme == "etd1":
            self.f1 = self.dt * _phi1(z)
        else:  # imex_cn
            self.cn_num = 1.0 - 0.5 * self.dt * lin
            self.cn_den = 1.0 + 0.5 * self.dt * lin

        # explicit (non-exponential) linear coefficient per mode
        if model.kind == "modified_swift_hohenberg":
            expl = -2.0 * mu + model.a
        else:
            expl = -model.a * np.ones_like(mu)
        self._explicit_lin = np.zeros_like(mu) if split_a else expl
        # fast-path plans (1-D): padded transforms on raw arrays
        self._fast = dom.dimension == 1
        if self._fast:
            n = dom.modes[0]
            self._n = n
            self._m_pad = padded_size(n, PAD_FACTOR) if self.padded else n
            self._pad_buf = np.zeros(self._m_pad)
            self._deriv_k = np.arange(1, n + 1) * np.pi / dom.lengths[0]
            self._proj = _cos_to_sin_matrix(n, 2 * n + 1)

    # right-hand side N(u, t) = g(t) - f(u) in coefficient space
    def nonlinear(self, c: np.ndarray, t: float, g: ForcingModel | None) -> np.ndarray:
        model = self.model
        if not self.include_nonlinear:
            out = np.zeros_like(c)
        elif self._fast:
            buf = self._pad_buf
            buf[: self._n] = c
            grid = dst(buf, type=1) * 0.5
            cube = dst(grid * grid * grid, type=1)[: self._n] / (self._m_pad + 1)
            fu = self._explicit_lin * c + cube
            if model.kind == "modified_swift_hohenberg" and model.b != 0.0:
                d = np.concatenate(([0.0], c * self._deriv_k))
                fu = fu + model.b * (self._proj @ _cos_series_product(d, d))
            out = -fu
        else:
            u = SpectralField(c, model.domain)
            fu = self._explicit_lin * c + cubic_coeffs(u)
            if model.kind == "modified_swift_hohenberg" and model.b != 0.0:
                fu = fu + model.b * gradient_square_coeffs(u)
            out = -fu
        if g is not None and g.kind != "zero":
            out = out + evaluate_coeffs(g, t)
        if self.mode_mask is not None:
            out = out * self.mode_mask
        return out

    def step(self, c: np.ndarray, t: float, g: ForcingModel | None) -> np.ndarray:
        dt = self.dt
        try:
            if self.scheme == "etd_rk4":
                n0 = self.nonlinear(c, t, g)
                a = self.exp_half * c + self.f0 * n0
                n1 = self.nonlinear(a, t + dt / 2.0, g)
                b = self.exp_half * c + self.f0 * n1
                n2 = self.nonlinear(b, t + dt / 2.0, g)
                cc = self.exp_half * a + self.f0 * (2.0 * n2 - n0)
                n3 = self.nonlinear(cc, t + dt, g)
                out = (self.exp_full * c + self.f1 * n0
                       + 2.0 * self.f2 * (n1 + n2) + self.f3 * n3)
            elif self.scheme == "etd1":
                out = self.exp_full * c + self.f1 * self.nonlinear(c, t, g)
            else:
                out = (self.cn_num * c + dt * self.nonlinear(c, t, g)) / self.cn_den
        except NonfiniteFieldError as exc:
            raise StepDivergedError(t) from exc
        if self.mode_mask is not None:
            out = out * self.mode_mask
        if not np.all(np.isfinite(out)):
            raise StepDivergedError(t)
        return out

    def check_divergence(self, c: np.ndarray, t: float) -> None:
        g = to_grid(SpectralField(c, self.model.domain))
        if not np.all(np.isfinite(g)) or np.max(np.abs(g)) > DIVERGENCE_GRID_MAX:
            raise StepDivergedError(t)


def step(state: SpectralField, t: float, g: ForcingModel | None, model: ModelSpec,
         dt: float, scheme: str = "etd_rk4") -> SpectralField:
    """One integrator step from t to t + dt."""
    stepper = Stepper(model, dt, scheme)
    return state.with_coeffs(stepper.step(state.coeffs, t, g))


def _lyapunov_track(model: ModelSpec, u: SpectralField) -> float:
    # inline import: gradient module depends on dynamics for shooting runs
    from .gradient import lyapunov_value

    return lyapunov_value(u, model.a, kind=model.kind)


def integrate(model: ModelSpec, g: ForcingModel | None, varsigma: SpectralField,
              tau: float, cfg: IntegratorConfig, stepper: Stepper | None = None,
              record_lyapunov: bool = True) -> Trajectory:
    """Integrate from initial state varsigma at time tau up to cfg.t_end.

    The number of steps is rounded so the horizon is an exact multiple of
    record_every * dt. On divergence the partial trajectory is returned with
    the error tag set.
    """
    if varsigma.domain != model.domain:
        raise ValueError("initial state domain does not match the model domain")
    if stepper is None:
        stepper = Stepper(model, cfg.dt, cfg.scheme, padded=cfg.padded)
    n_rec = max(1, int(round((cfg.t_end - tau) / (cfg.dt * cfg.record_every))))
    phase0 = g.phase_offset if g is not None else 0.0

    times = [tau]
    samples = [varsigma.coeffs.copy()]
    c = varsigma.coeffs.copy()
    error = None
    t = tau
    for i_rec in range(n_rec):
        try:
            for j in range(cfg.record_every):
                c = stepper.step(c, t, g)
                t = tau + (i_rec * cfg.record_every + j + 1) * cfg.dt
            stepper.check_divergence(c, t)
        except StepDivergedError:
            error = "step diverged"
            break
        times.append(t)
        samples.append(c.copy())

    m = len(times)
    coeffs = np.stack(samples)
    l2 = np.empty(m); l4 = np.empty(m); l6 = np.empty(m); h2 = np.empty(m)
    V = np.empty(m)
    for i in range(m):
        u = SpectralField(coeffs[i], model.domain)
        nb = norms(u)
        l2[i], l4[i], l6[i], h2[i] = nb.l2, nb.l4, nb.l6, nb.h2
        V[i] = _lyapunov_track(model, u) if record_lyapunov else np.nan
    fingerprint = phase0 + np.asarray(times)

    return Trajectory(model=model, times=np.asarray(times), coeffs=coeffs,
                      l2=l2, l4=l4, l6=l6, h2=h2, lyapunov=V,
                      fingerprint=fingerprint, dt=cfg.dt,
                      record_every=cfg.record_every, error=error)


# ---------------------------------------------------------------------------
# mild-solution defect

_PANEL = 4  # samples per interpolation panel of the exponential quadrature


def _exponential_panel_weights(z: np.ndarray, h: float) -> np.ndarray:
    """Weights w_j(z) with Int_0^{P h} e^{z(1-s/(P h))} p(s) ds = sum w_j p(s_j)
    exact for polynomials p of degree <= P (P = panel size, nodes s_j = j h).

    Uses Int_0^1 e^{z(1-q)} q^m dq = m! phi_{m+1}(z); the stiff kernel is
    integrated exactly so the composite error comes from interpolating the
    smooth factor only.
    """
    import math

    P = _PANEL
    nodes = np.arange(P + 1) / P
    V = np.vander(nodes, P + 1, increasing=True)       # V[i, m] = theta_i^m
    A = np.linalg.inv(V)                               # coeff[m] = A[m, :] @ values
    phis = _phi_ladder(z, P + 1)
    w = np.zeros((P + 1,) + z.shape)
    for m in range(P + 1):
        moment = math.factorial(m) * phis[m]           # m! phi_{m+1}(z)
        for j in range(P + 1):
            w[j] += A[m, j] * moment
    return w * (P * h)


def duhamel_residual(traj: Trajectory, g: ForcingModel | None, model: ModelSpec,
                     stride: int = 4) -> float:
    """Max defect of the variation-of-constants identity over sample windows.

    Over each recorded window [t_i, t_{i+stride}] the integral of
    exp(-L (t-s)) (f(u(s)) - g(s)) is evaluated by composite exponential
    quadrature: the exponential kernel is integrated exactly against
    piecewise quartic interpolants of the recorded integrand, panel by
    panel, so stiff modes contribute no kernel error. The defect of the
    window endpoint against the propagated start plus the integral is
    reported in the L2 field norm, maximized over all windows.
    """
    m = len(traj.times)
    if stride < _PANEL or stride >= m:
        raise ValueError("stride must satisfy 4 <= stride < number of samples")
    if stride % _PANEL != 0:
        raise ValueError("stride must be a multiple of 4")
    ds = traj.sample_dt
    if not np.allclose(np.diff(traj.times), ds, rtol=1e-9, atol=1e-12):
        raise ValueError("duhamel_residual needs uniformly spaced samples")

    mu = model.domain.mode_mu()
    lin = mu * mu if model.kind == "modified_swift_hohenberg" else mu

    flat = traj.coeffs.reshape(m, -1)
    integrand = np.empty_like(flat)
    for i in range(m):
        u = traj.field(i)
        if model.kind == "modified_swift_hohenberg":
            fu = (-2.0 * mu + model.a) * u.coeffs + cubic_coeffs(u)
            if model.b != 0.0:
                fu = fu + model.b * gradient_square_coeffs(u)
        else:
            fu = -model.a * u.coeffs + cubic_coeffs(u)
        if g is not None and g.kind != "zero":
            fu = fu - evaluate_coeffs(g, traj.times[i])
        integrand[i] = fu.ravel()

    lin_flat = lin.ravel()
    z_panel = -lin_flat * (_PANEL * ds)
    w_panel = _exponential_panel_weights(z_panel, ds)   # (_PANEL+1, n_modes)

    # combined per-offset weights: panel weight times the exact decay from the
    # panel end to the window end
    comb = np.zeros((stride + 1, flat.shape[1]))
    for p0 in range(0, stride, _PANEL):
        tail = (stride - (p0 + _PANEL)) * ds
        pref = np.exp(-lin_flat * tail)
        for j in range(_PANEL + 1):
            comb[p0 + j] += pref * w_panel[j]

    e_full = np.exp(-lin_flat * stride * ds)
    n_win = m - stride
    acc = np.zeros((n_win, flat.shape[1]))
    for j in range(stride + 1):
        acc += comb[j] * integrand[j:j + n_win]
    defect = flat[stride:stride + n_win] - e_full * flat[:n_win] + acc
    scale = float(np.prod([l / 2.0 for l in model.domain.lengths]))
    return float(np.sqrt(scale * np.max(np.sum(defect**2, axis=1))))


def skew_orbit(traj: Trajectory, g: ForcingModel | None):
    """Product-flow view: pairs (shifted-forcing fingerprint, state)."""
    phase0 = g.phase_offset if g is not None else 0.0
    return [(float(phase0 + t), traj.field(i)) for i, t in enumerate(traj.times)]

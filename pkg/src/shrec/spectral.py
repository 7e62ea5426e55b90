"""Sine-basis spectral discretization of the fourth-order model operators.

The state space is the span of Dirichlet sine modes on an interval (0, l)
or a rectangle; both boundary conditions u = lap(u) = 0 are satisfied by
every basis function, so the discretization needs no boundary treatment.
All products (cubic term, squared gradient) are formed with factor-2 zero
padding, which de-aliases them exactly for this trigonometric family.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy.fft import dst, next_fast_len

__all__ = [
    "DomainSpec",
    "OperatorSpectrum",
    "SpectralField",
    "NormBundle",
    "build_spectrum",
    "lambda_ladder",
    "LambdaLadder",
    "to_grid",
    "to_coeff",
    "nonlinear_f",
    "gradient_square_coeffs",
    "norms",
    "zero_field",
    "mode_field",
    "random_field",
]

PAD_FACTOR = 2  # de-aliases products up to cubic order exactly


class NonfiniteFieldError(FloatingPointError):
    """Grid values overflowed or became non-finite (blow-up signal)."""


def _is_power_of_two(n: int) -> bool:
    return n >= 1 and (n & (n - 1)) == 0


@dataclass(frozen=True)
class DomainSpec:
    """Interval (1-D) or rectangle (2-D) with Dirichlet sine truncation.

    lengths are the side lengths per axis; modes is the number of retained
    sine modes per axis (a power of two, for transform efficiency).
    """

    dimension: int = 1
    lengths: tuple[float, ...] = (np.pi,)
    modes: tuple[int, ...] = (128,)

    def __post_init__(self):
        if self.dimension not in (1, 2):
            raise ValueError(f"dimension must be 1 or 2, got {self.dimension}")
        object.__setattr__(self, "lengths", tuple(float(l) for l in np.atleast_1d(self.lengths)))
        object.__setattr__(self, "modes", tuple(int(n) for n in np.atleast_1d(self.modes)))
        if len(self.lengths) != self.dimension or len(self.modes) != self.dimension:
            raise ValueError("lengths and modes must have one entry per axis")
        if any(l <= 0 for l in self.lengths):
            raise ValueError("lengths must be positive")
        if any(n < 2 or not _is_power_of_two(n) for n in self.modes):
            raise ValueError("modes must be powers of two, >= 2 per axis")

    @property
    def measure(self) -> float:
        """Lebesgue measure of the domain."""
        return float(np.prod(self.lengths))

    def axis_mu(self, axis: int) -> np.ndarray:
        """Eigenvalues (k*pi/l)^2 of the 1-D Dirichlet Laplacian on one axis.

        pi/l is formed first so the default interval gives exact integers.
        """
        k = np.arange(1, self.modes[axis] + 1, dtype=float)
        return (k * (np.pi / self.lengths[axis])) ** 2

    def mode_mu(self) -> np.ndarray:
        """Per-mode eigenvalues of -lap on the full mode lattice."""
        if self.dimension == 1:
            return self.axis_mu(0)
        return self.axis_mu(0)[:, None] + self.axis_mu(1)[None, :]


@dataclass(frozen=True)
class OperatorSpectrum:
    """Distinct eigenvalue ladder of -lap with multiplicities.

    mu is strictly ascending; biharmonic holds mu^2 (the eigenvalues of the
    fourth-order linear part); multiplicity counts coincident mode sums.
    """

    domain: DomainSpec
    mu: tuple[float, ...]
    multiplicity: tuple[int, ...]
    biharmonic: tuple[float, ...]

    def __post_init__(self):
        if not all(a < b for a, b in zip(self.mu, self.mu[1:])):
            raise ValueError("mu ladder must be strictly ascending")


@dataclass(frozen=True)
class SpectralField:
    """A state expressed by its sine-basis amplitudes on a domain."""

    coeffs: np.ndarray
    domain: DomainSpec

    def __post_init__(self):
        c = np.asarray(self.coeffs, dtype=float)
        if c.shape != tuple(self.domain.modes):
            raise ValueError(f"coefficient shape {c.shape} incompatible with modes {self.domain.modes}")
        if not np.all(np.isfinite(c)):
            raise NonfiniteFieldError("nonfinite coefficients")
        c = c.copy()
        c.setflags(write=False)
        object.__setattr__(self, "coeffs", c)

    def with_coeffs(self, coeffs: np.ndarray) -> "SpectralField":
        return SpectralField(coeffs, self.domain)

    def l2(self) -> float:
        """Exact L2 norm from coefficients (Parseval)."""
        scale = np.prod([l / 2.0 for l in self.domain.lengths])
        return float(np.sqrt(scale * np.sum(self.coeffs**2)))

    def h2(self) -> float:
        """Exact ||lap u|| from coefficients."""
        scale = np.prod([l / 2.0 for l in self.domain.lengths])
        mu = self.domain.mode_mu()
        return float(np.sqrt(scale * np.sum((mu * self.coeffs) ** 2)))

    def distance(self, other: "SpectralField") -> float:
        return self.with_coeffs(self.coeffs - other.coeffs).l2()


@dataclass(frozen=True)
class NormBundle:
    """L2, L4, L6 and ||lap u|| of a state, as used by the energy estimates."""

    l2: float
    l4: float
    l6: float
    h2: float


def zero_field(domain: DomainSpec) -> SpectralField:
    return SpectralField(np.zeros(domain.modes), domain)


def mode_field(domain: DomainSpec, k, amplitude: float = 1.0) -> SpectralField:
    """Single-mode field amplitude*sin(k.x); k is an int (1-D) or pair (2-D)."""
    c = np.zeros(domain.modes)
    if domain.dimension == 1:
        c[int(k) - 1] = amplitude
    else:
        k1, k2 = k
        c[int(k1) - 1, int(k2) - 1] = amplitude
    return SpectralField(c, domain)


def random_field(domain: DomainSpec, rng, scale: float = 1.0, decay: float = 0.5) -> SpectralField:
    """Smooth random field: independent mode amplitudes with exponential decay."""
    mu = domain.mode_mu()
    c = rng.standard_normal(domain.modes) * np.exp(-decay * np.sqrt(mu))
    norm = SpectralField(c, domain).l2()
    if norm > 0:
        c = c * (scale / norm)
    return SpectralField(c, domain)


# ---------------------------------------------------------------------------
# spectrum / ladder

def build_spectrum(domain: DomainSpec, rel_tol: float = 1e-12) -> OperatorSpectrum:
    """Distinct eigenvalues of -lap with multiplicities over retained modes."""
    mu_all = np.sort(domain.mode_mu().ravel())
    distinct: list[float] = []
    mult: list[int] = []
    for m in mu_all:
        if distinct and m <= distinct[-1] * (1 + rel_tol):
            mult[-1] += 1
        else:
            distinct.append(float(m))
            mult.append(1)
    mu = tuple(distinct)
    return OperatorSpectrum(domain=domain, mu=mu, multiplicity=tuple(mult),
                            biharmonic=tuple(m * m for m in mu))


class LambdaLadder(tuple):
    """Ladder of (lambda_k(a), multiplicity) plus the shift-free minimum lam0."""

    lam0: float

    def __new__(cls, entries, lam0):
        obj = super().__new__(cls, tuple(entries))
        obj.lam0 = float(lam0)
        return obj

    @property
    def entries(self):
        return tuple(self)


def lambda_ladder(spectrum: OperatorSpectrum, a: float) -> LambdaLadder:
    """Eigenvalues mu^2 - 2 mu + a of the shifted operator, with multiplicities.

    lam0 is min(mu^2 - 2 mu) over the retained ladder; the linear-instability
    condition for the origin reads a < -lam0.
    """
    mu = np.asarray(spectrum.mu)
    lam = mu * mu - 2.0 * mu + a
    lam0 = float(np.min(mu * mu - 2.0 * mu))
    return LambdaLadder(zip(lam.tolist(), spectrum.multiplicity), lam0)


# ---------------------------------------------------------------------------
# transforms

def _synth_1d(coeffs: np.ndarray, m: int, axis: int = -1) -> np.ndarray:
    """Values sum_k c_k sin(k pi j/(m+1)) on the m-point interior grid."""
    shape = list(coeffs.shape)
    n = shape[axis]
    if m > n:
        pad = [(0, 0)] * coeffs.ndim
        pad[axis] = (0, m - n)
        coeffs = np.pad(coeffs, pad)
    return dst(coeffs, type=1, axis=axis) / 2.0


def _analyze_1d(values: np.ndarray, axis: int = -1) -> np.ndarray:
    m = values.shape[axis]
    return dst(values, type=1, axis=axis) / (m + 1)


def _truncate(arr: np.ndarray, modes: tuple[int, ...]) -> np.ndarray:
    slices = tuple(slice(0, n) for n in modes)
    return arr[slices]


def padded_size(n: int, pad: int = PAD_FACTOR) -> int:
    """Interior grid size >= pad*n whose implied FFT length is 5-smooth.

    A DST-I of length m costs like an FFT of length 2(m+1); rounding m+1 up
    to the next fast length avoids prime-size slow paths while keeping the
    de-aliasing guarantee (any m >= pad*n works).
    """
    if pad <= 1:
        return n
    return int(next_fast_len(pad * n + 1, real=True)) - 1


def to_grid(u: SpectralField, pad: int = 1) -> np.ndarray:
    """Collocation values on an interior grid with >= pad*N points per axis."""
    c = u.coeffs
    for ax, n in enumerate(u.domain.modes):
        c = _synth_1d(c, padded_size(n, pad), axis=ax)
    return c


def to_coeff(values: np.ndarray, domain: DomainSpec) -> SpectralField:
    """Inverse of to_grid: exact for band-limited data on a matching grid."""
    v = np.asarray(values, dtype=float)
    if v.ndim != domain.dimension:
        raise ValueError(f"grid rank {v.ndim} does not match domain dimension {domain.dimension}")
    for ax, n in enumerate(domain.modes):
        if v.shape[ax] < n:
            raise ValueError(f"grid axis {ax} has {v.shape[ax]} points, fewer than {n} modes")
        v = _analyze_1d(v, axis=ax)
    return SpectralField(_truncate(v, domain.modes), domain)


def _grid_weight(domain: DomainSpec, grid_shape: tuple[int, ...]) -> float:
    return float(np.prod([l / (m + 1) for l, m in zip(domain.lengths, grid_shape)]))


# ---------------------------------------------------------------------------
# squared-gradient term (exact Galerkin via cosine series)

def _cos_series_product(alpha: np.ndarray, beta: np.ndarray) -> np.ndarray:
    """Cosine coefficients of the product of two cosine series.

    cos q cos q' splits into cos(q+q') and cos|q-q'|; the first is a
    convolution, the second a two-sided cross-correlation.
    """
    la, lb = len(alpha), len(beta)
    n = la + lb - 1
    conv = np.convolve(alpha, beta)
    # corr[k] = sum_q alpha[q] beta[q - (k - (lb-1))]; offsets +-p live at lb-1 -+ p
    corr = np.correlate(alpha, beta, "full")
    out = conv.copy()
    out[0] += corr[lb - 1]
    out[1:lb] += corr[lb - 2::-1]   # sum_q alpha_q beta_{q+p}
    out[1:la] += corr[lb:]          # sum_q beta_q alpha_{q+p}
    return 0.5 * out


@lru_cache(maxsize=32)
def _cos_to_sin_matrix(n_sin: int, n_cos: int) -> np.ndarray:
    """Galerkin projection of cos(q pi x/l) onto sin(m pi x/l), any l.

    Entry (m-1, q) is (2/l) Int_0^l cos(q pi x/l) sin(m pi x/l) dx
    = (4 m/pi)/(m^2 - q^2) when m+q is odd, else 0.
    """
    m = np.arange(1, n_sin + 1, dtype=float)[:, None]
    q = np.arange(0, n_cos, dtype=float)[None, :]
    odd = (m + q) % 2 == 1
    denom = np.where(odd, m * m - q * q, 1.0)
    out = np.where(odd, (4.0 * m / np.pi) / denom, 0.0)
    out.setflags(write=False)
    return out


def _derivative_cos_coeffs(coeffs: np.ndarray, length: float, axis: int = 0) -> np.ndarray:
    """Cosine coefficients (index 0..N) of d/dx of a sine series along axis."""
    n = coeffs.shape[axis]
    k = np.arange(1, n + 1, dtype=float) * np.pi / length
    shape = [1] * coeffs.ndim
    shape[axis] = n
    d = coeffs * k.reshape(shape)
    pad = [(0, 0)] * coeffs.ndim
    pad[axis] = (1, 0)
    return np.pad(d, pad)


def gradient_square_coeffs(u: SpectralField) -> np.ndarray:
    """Sine-basis Galerkin projection of |grad u|^2, truncated to the domain modes.

    The gradient is an exact cosine series, its square is formed by exact
    series convolution, and the cosine-to-sine projection uses the closed-form
    integral matrix; no quadrature error enters.
    """
    dom = u.domain
    if dom.dimension == 1:
        d = _derivative_cos_coeffs(u.coeffs, dom.lengths[0])
        a = _cos_series_product(d, d)
        return _cos_to_sin_matrix(dom.modes[0], len(a)) @ a
    return _gradient_square_coeffs_2d(u)


@lru_cache(maxsize=16)
def _cos_pair_tensor(n: int) -> np.ndarray:
    """X[p, q, q'] with cos q cos q' = sum_p X[p,q,q'] cos p; q, q' in 0..n."""
    X = np.zeros((2 * n + 1, n + 1, n + 1))
    q = np.arange(n + 1)
    for p in range(2 * n + 1):
        X[p] = 0.5 * ((q[:, None] + q[None, :] == p).astype(float)
                      + (np.abs(q[:, None] - q[None, :]) == p).astype(float))
    X.setflags(write=False)
    return X


@lru_cache(maxsize=16)
def _sin_pair_tensor(n: int) -> np.ndarray:
    """Y[p, k, k'] with sin k sin k' = sum_p Y[p,k,k'] cos p; k, k' in 1..n."""
    Y = np.zeros((2 * n + 1, n, n))
    k = np.arange(1, n + 1)
    for p in range(2 * n + 1):
        Y[p] = 0.5 * ((np.abs(k[:, None] - k[None, :]) == p).astype(float)
                      - (k[:, None] + k[None, :] == p).astype(float))
    Y.setflags(write=False)
    return Y


def _mixed_square_cos2d(c: np.ndarray) -> np.ndarray:
    """Cosine-cosine coefficients of the square of a cos(axis0)-sin(axis1) series.

    c has shape (n1+1, n2): cosine degrees 0..n1 along axis 0, sine degrees
    1..n2 along axis 1. Exact coefficient-space expansion; no quadrature.
    """
    n1 = c.shape[0] - 1
    n2 = c.shape[1]
    X = _cos_pair_tensor(n1)
    Y = _sin_pair_tensor(n2)
    return np.einsum("pqr,qk,rm,skm->ps", X, c, c, Y, optimize=True)


def _gradient_square_coeffs_2d(u: SpectralField) -> np.ndarray:
    dom = u.domain
    n1, n2 = dom.modes
    # u_x is a cos(x)-sin(y) series, u_y a sin(x)-cos(y) series; each square
    # is a cosine-cosine series of degree (2n1, 2n2), projected in closed form.
    cx = _derivative_cos_coeffs(u.coeffs, dom.lengths[0], axis=0)      # (n1+1, n2)
    cy = _derivative_cos_coeffs(u.coeffs, dom.lengths[1], axis=1).T    # (n2+1, n1)

    S = _mixed_square_cos2d(cx) + _mixed_square_cos2d(cy).T
    P1 = _cos_to_sin_matrix(n1, S.shape[0])
    P2 = _cos_to_sin_matrix(n2, S.shape[1])
    return P1 @ S @ P2.T


# ---------------------------------------------------------------------------
# nonlinearity and norms

def cubic_coeffs(u: SpectralField) -> np.ndarray:
    """Sine-basis projection of u^3 (exact: factor-2 padding de-aliases cubes)."""
    g = to_grid(u, pad=PAD_FACTOR)
    if not np.all(np.isfinite(g)):
        raise NonfiniteFieldError("nonfinite nonlinearity")
    with np.errstate(over="ignore", invalid="ignore"):
        g = g * g * g
    if not np.all(np.isfinite(g)):
        raise NonfiniteFieldError("nonfinite nonlinearity")
    c = g
    for ax in range(u.domain.dimension):
        c = _analyze_1d(c, axis=ax)
    return _truncate(c, u.domain.modes)


def nonlinear_f(u: SpectralField, a: float, b: float) -> SpectralField:
    """Projection of 2 lap(u) + a u + b |grad u|^2 + u^3 onto the retained modes."""
    mu = u.domain.mode_mu()
    out = (-2.0 * mu + a) * u.coeffs + cubic_coeffs(u)
    if b != 0.0:
        out = out + b * gradient_square_coeffs(u)
    if not np.all(np.isfinite(out)):
        raise NonfiniteFieldError("nonfinite nonlinearity")
    return SpectralField(out, u.domain)


def norms(u: SpectralField) -> NormBundle:
    """Quadrature norms on the padded grid; h2 exactly from coefficients.

    The interior-point rectangle rule equals the trapezoid rule here (the
    integrands u^2, u^4, u^6 vanish on the boundary) and is exact for the
    L2 and L4 powers at this padding.
    """
    g = to_grid(u, pad=PAD_FACTOR)
    if not np.all(np.isfinite(g)):
        raise NonfiniteFieldError("nonfinite field values")
    w = _grid_weight(u.domain, g.shape)
    g2 = g * g
    l2 = np.sqrt(w * np.sum(g2))
    l4 = (w * np.sum(g2 * g2)) ** 0.25
    l6 = (w * np.sum(g2 * g2 * g2)) ** (1.0 / 6.0)
    return NormBundle(l2=float(l2), l4=float(l4), l6=float(l6), h2=u.h2())

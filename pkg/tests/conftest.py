import numpy as np
import pytest
from scipy.special import roots_legendre

from shrec import DomainSpec


@pytest.fixture(scope="session")
def dom_pi() -> DomainSpec:
    """Desk default: interval (0, pi), 128 modes."""
    return DomainSpec(1, (np.pi,), (128,))


@pytest.fixture(scope="session")
def dom_small() -> DomainSpec:
    return DomainSpec(1, (np.pi,), (16,))


def gauss_quad(length: float, n: int = 800):
    """Gauss-Legendre nodes/weights on (0, length): spectrally exact oracle."""
    x, w = roots_legendre(n)
    return (x + 1.0) * length / 2.0, w * length / 2.0


def eval_sine_series(coeffs, length, x):
    """Direct (transform-free) evaluation of a sine series at points x."""
    coeffs = np.asarray(coeffs)
    k = np.arange(1, len(coeffs) + 1)
    return np.sin(np.outer(x, k) * np.pi / length) @ coeffs


def eval_sine_deriv(coeffs, length, x):
    coeffs = np.asarray(coeffs)
    k = np.arange(1, len(coeffs) + 1) * np.pi / length
    return np.cos(np.outer(x, np.arange(1, len(coeffs) + 1)) * np.pi / length) @ (coeffs * k)


def galerkin_project(values, length, xg, wg, n_modes):
    """Sine-basis Galerkin coefficients of grid values via Gauss quadrature."""
    out = np.empty(n_modes)
    for m in range(1, n_modes + 1):
        out[m - 1] = (2.0 / length) * np.sum(wg * values * np.sin(m * np.pi * xg / length))
    return out

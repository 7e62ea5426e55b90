import numpy as np
import pytest

from shrec import (
    DomainSpec,
    SpectralField,
    build_spectrum,
    lambda_ladder,
    mode_field,
    nonlinear_f,
    norms,
    random_field,
    to_coeff,
    to_grid,
    zero_field,
)
from shrec.spectral import NonfiniteFieldError, cubic_coeffs, gradient_square_coeffs

from conftest import eval_sine_deriv, eval_sine_series, galerkin_project, gauss_quad


# ---------------------------------------------------------------------------
# domain and spectrum

def test_domain_validation():
    with pytest.raises(ValueError):
        DomainSpec(3, (1.0, 1.0, 1.0), (4, 4, 4))
    with pytest.raises(ValueError):
        DomainSpec(1, (-1.0,), (8,))
    with pytest.raises(ValueError):
        DomainSpec(1, (np.pi,), (6,))  # not a power of two


def test_spectrum_1d_pi():
    # analytic eigenvalues of -d^2/dx^2 with Dirichlet data on (0, pi)
    spec = build_spectrum(DomainSpec(1, (np.pi,), (4,)))
    assert spec.mu == (1.0, 4.0, 9.0, 16.0)
    assert spec.multiplicity == (1, 1, 1, 1)
    assert spec.biharmonic == (1.0, 16.0, 81.0, 256.0)


def test_spectrum_1d_length_2pi():
    spec = build_spectrum(DomainSpec(1, (2 * np.pi,), (2,)))
    assert np.allclose(spec.mu, (0.25, 1.0))


def test_spectrum_2d_degeneracy():
    # sums k1^2 + k2^2 on the pi-square: (1,2) and (2,1) coincide at mu = 5
    spec = build_spectrum(DomainSpec(2, (np.pi, np.pi), (2, 2)))
    assert spec.mu == (2.0, 5.0, 8.0)
    assert spec.multiplicity == (1, 2, 1)


def test_lambda_ladder_values_and_lam0():
    spec = build_spectrum(DomainSpec(1, (np.pi,), (8,)))
    lad = lambda_ladder(spec, 0.0)
    lams = [lam for lam, _ in lad.entries]
    assert lams[:3] == [-1.0, 8.0, 63.0]
    assert lad.lam0 == -1.0


def test_lambda_ladder_affine_in_a():
    spec = build_spectrum(DomainSpec(1, (np.pi,), (16,)))
    for a in (-3.0, 0.0, 0.7, 2.5):
        l0 = lambda_ladder(spec, 0.0)
        la = lambda_ladder(spec, a)
        diffs = [x - y for (x, _), (y, _) in zip(la.entries, l0.entries)]
        assert np.allclose(diffs, a)
        assert la.lam0 == l0.lam0  # shift-free by definition


def test_lambda_marginal_at_one():
    spec = build_spectrum(DomainSpec(1, (np.pi,), (4,)))
    lad = lambda_ladder(spec, 1.0)
    assert lad.entries[0] == (0.0, 1)  # exact marginal mode


# ---------------------------------------------------------------------------
# transforms

def test_zero_roundtrip(dom_small):
    u = zero_field(dom_small)
    assert np.all(to_grid(u) == 0.0)
    assert np.all(to_coeff(to_grid(u), dom_small).coeffs == 0.0)


def test_roundtrip_random(dom_pi):
    rng = np.random.default_rng(1)
    for _ in range(5):
        u = random_field(dom_pi, rng)
        v = to_coeff(to_grid(u), dom_pi)
        assert u.distance(v) <= 1e-12 * u.l2()


def test_roundtrip_2d():
    dom = DomainSpec(2, (np.pi, 2.0), (8, 4))
    rng = np.random.default_rng(2)
    u = random_field(dom, rng)
    v = to_coeff(to_grid(u), dom)
    assert u.distance(v) <= 1e-12 * u.l2()


def test_parseval(dom_pi):
    rng = np.random.default_rng(3)
    for _ in range(5):
        u = random_field(dom_pi, rng, scale=2.0)
        nb = norms(u)
        assert abs(nb.l2 - u.l2()) <= 1e-10 * u.l2()


def test_single_mode_norm_both_routes():
    dom = DomainSpec(1, (np.pi,), (16,))
    u = mode_field(dom, 1, 1.0)
    assert abs(u.l2() ** 2 - np.pi / 2) < 1e-12
    assert abs(norms(u).l2 ** 2 - np.pi / 2) < 1e-10


def test_size_mismatch_errors(dom_small):
    with pytest.raises(ValueError):
        to_coeff(np.zeros(4), dom_small)
    with pytest.raises(ValueError):
        SpectralField(np.zeros(7), dom_small)


def test_diagonality_of_biharmonic(dom_small):
    # applying the fourth-order operator == coefficientwise mu^2 multiplication;
    # cross-check one mode against the analytic image on the grid
    u = mode_field(dom_small, 3, 1.0)
    mu = dom_small.mode_mu()
    image = u.with_coeffs(mu**2 * u.coeffs)
    x = np.arange(1, 17) * np.pi / 17
    assert np.allclose(to_grid(image), 81.0 * np.sin(3 * x), atol=1e-12)


# ---------------------------------------------------------------------------
# norms

def test_norms_analytic_sin():
    dom = DomainSpec(1, (np.pi,), (32,))
    nb = norms(mode_field(dom, 1, 1.0))
    assert abs(nb.l2**2 - np.pi / 2) < 1e-10
    assert abs(nb.l4**4 - 3 * np.pi / 8) < 1e-10
    assert abs(nb.l6**6 - 5 * np.pi / 16) < 1e-10
    assert abs(nb.h2**2 - np.pi / 2) < 1e-12


def test_norms_zero(dom_small):
    nb = norms(zero_field(dom_small))
    assert nb.l2 == nb.l4 == nb.l6 == nb.h2 == 0.0


def test_cauchy_schwarz_l2_l4(dom_pi):
    rng = np.random.default_rng(4)
    measure = dom_pi.measure
    for _ in range(20):
        nb = norms(random_field(dom_pi, rng, scale=rng.uniform(0.1, 3.0)))
        assert nb.l2 <= measure**0.25 * nb.l4 * (1 + 1e-10)


# ---------------------------------------------------------------------------
# nonlinearity

def test_nonlinear_zero(dom_small):
    f = nonlinear_f(zero_field(dom_small), a=1.3, b=0.7)
    assert np.all(f.coeffs == 0.0)


def test_nonlinear_single_mode_cubic():
    # u = c sin x: cubic projects to (3 c^3/4) sin x - (c^3/4) sin 3x
    dom = DomainSpec(1, (np.pi,), (8,))
    for c, a in ((0.5, 0.0), (1.3, -2.0), (2.0, 4.0)):
        f = nonlinear_f(mode_field(dom, 1, c), a=a, b=0.0)
        expect = np.zeros(8)
        expect[0] = (a - 2.0) * c + 0.75 * c**3
        expect[2] = -0.25 * c**3
        assert np.allclose(f.coeffs, expect, atol=1e-12)


def test_gradient_term_single_mode():
    # |grad u|^2 of c sin x is c^2 (1 + cos 2x)/2; mode-1 projection 4 c^2/(3 pi)
    dom = DomainSpec(1, (np.pi,), (8,))
    g = gradient_square_coeffs(mode_field(dom, 1, 1.0))
    assert abs(g[0] - 4.0 / (3.0 * np.pi)) < 1e-12
    xg, wg = gauss_quad(np.pi)
    oracle = galerkin_project((np.cos(xg)) ** 2, np.pi, xg, wg, 8)
    assert np.abs(g - oracle).max() < 1e-10


def test_nonlinear_f_vs_quadrature_oracle(dom_pi):
    # dense-grid (Gauss, ~6x denser than the padded grid) quadrature oracle
    rng = np.random.default_rng(5)
    length = dom_pi.lengths[0]
    xg, wg = gauss_quad(length, 1600)
    for a, b in ((0.0, 0.0), (0.5, 0.05), (-1.0, 1.0)):
        u = random_field(dom_pi, rng)
        ug = eval_sine_series(u.coeffs, length, xg)
        upg = eval_sine_deriv(u.coeffs, length, xg)
        lap = eval_sine_series(-dom_pi.mode_mu() * u.coeffs, length, xg)
        fvals = 2.0 * lap + a * ug + b * upg**2 + ug**3
        oracle = galerkin_project(fvals, length, xg, wg, dom_pi.modes[0])
        f = nonlinear_f(u, a=a, b=b)
        rel = np.linalg.norm(f.coeffs - oracle) / np.linalg.norm(oracle)
        assert rel < 1e-8


def test_nonlinear_f_2d_vs_oracle():
    dom = DomainSpec(2, (np.pi, 1.5), (4, 4))
    rng = np.random.default_rng(6)
    u = random_field(dom, rng)
    from scipy.special import roots_legendre

    nx, wx = roots_legendre(80)
    xg = (nx + 1) * dom.lengths[0] / 2; wxs = wx * dom.lengths[0] / 2
    yg = (nx + 1) * dom.lengths[1] / 2; wys = wx * dom.lengths[1] / 2
    XX, YY = np.meshgrid(xg, yg, indexing="ij")
    WW = np.outer(wxs, wys)
    k1 = np.arange(1, 5) * np.pi / dom.lengths[0]
    k2 = np.arange(1, 5) * np.pi / dom.lengths[1]
    ug = np.zeros_like(XX); uxg = np.zeros_like(XX); uyg = np.zeros_like(XX)
    lapg = np.zeros_like(XX)
    for i in range(4):
        for j in range(4):
            c = u.coeffs[i, j]
            sx, sy = np.sin(k1[i] * XX), np.sin(k2[j] * YY)
            cx, cy = np.cos(k1[i] * XX), np.cos(k2[j] * YY)
            ug += c * sx * sy
            uxg += c * k1[i] * cx * sy
            uyg += c * k2[j] * sx * cy
            lapg += -c * (k1[i]**2 + k2[j]**2) * sx * sy
    a, b = 0.3, 0.4
    fvals = 2.0 * lapg + a * ug + b * (uxg**2 + uyg**2) + ug**3
    oracle = np.zeros((4, 4))
    scale = 4.0 / (dom.lengths[0] * dom.lengths[1])
    for m1 in range(1, 5):
        for m2 in range(1, 5):
            oracle[m1-1, m2-1] = scale * np.sum(
                WW * fvals * np.sin(m1 * np.pi * XX / dom.lengths[0])
                * np.sin(m2 * np.pi * YY / dom.lengths[1]))
    f = nonlinear_f(u, a=a, b=b)
    assert np.linalg.norm(f.coeffs - oracle) / np.linalg.norm(oracle) < 1e-8


def test_nonlinear_overflow_error(dom_small):
    huge = mode_field(dom_small, 1, 1e200)
    with pytest.raises(NonfiniteFieldError):
        nonlinear_f(huge, a=0.0, b=0.0)


def test_cubic_is_exact_galerkin(dom_pi):
    rng = np.random.default_rng(7)
    length = dom_pi.lengths[0]
    xg, wg = gauss_quad(length, 1600)
    u = random_field(dom_pi, rng)
    ug = eval_sine_series(u.coeffs, length, xg)
    oracle = galerkin_project(ug**3, length, xg, wg, dom_pi.modes[0])
    got = cubic_coeffs(u)
    assert np.linalg.norm(got - oracle) <= 1e-11 * max(1.0, np.linalg.norm(oracle))

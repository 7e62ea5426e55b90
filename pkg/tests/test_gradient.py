import numpy as np
import pytest

from shrec import (
    DomainSpec,
    IntegratorConfig,
    ModelSpec,
    SpectralField,
    build_spectrum,
    integrate,
    lambda_ladder,
    mode_field,
    random_field,
    zero_field,
    zero_forcing,
)
from shrec.gradient import (
    default_seeds,
    dissipation,
    equilibrium_identity,
    find_equilibria,
    jacobian,
    lyapunov,
    marginal_modes,
    morse_decomposition,
    morse_index_zero,
    residual_coeffs,
    single_mode_amplitude,
)
from shrec.spectral import PAD_FACTOR, _grid_weight, to_grid


@pytest.fixture(scope="module")
def dom():
    return DomainSpec(1, (np.pi,), (64,))


@pytest.fixture(scope="module")
def equilibria_a05(dom):
    return find_equilibria(0.5, 0.0, default_seeds(dom, 0.5))


def quad4(u):
    g = to_grid(u, pad=PAD_FACTOR)
    return _grid_weight(u.domain, g.shape) * np.sum(g**4)


# ---------------------------------------------------------------------------
# Lyapunov function

def test_lyapunov_zero(dom):
    assert lyapunov(zero_field(dom), a=0.7) == 0.0


def test_lyapunov_single_mode_closed_form(dom):
    # V(c sin x) = (a-1)(pi/2) c^2 / 2 + (3 pi/8) c^4 / 4
    for a, c in ((0.5, 0.3), (0.0, 1.0), (2.0, 0.7)):
        got = lyapunov(mode_field(dom, 1, c), a)
        expect = 0.5 * (a - 1.0) * (np.pi / 2) * c**2 + 0.25 * (3 * np.pi / 8) * c**4
        assert abs(got - expect) < 1e-12


def test_lyapunov_lower_bound(dom):
    # V(u) >= (1/4) Int (u^2 + lam0 + a)^2 - |O|(lam0+a)^2/4, by quadrature
    lad = lambda_ladder(build_spectrum(dom), 0.0)
    lam0 = lad.lam0
    rng = np.random.default_rng(10)
    for _ in range(10):
        a = rng.uniform(-1.0, 2.0)
        u = random_field(dom, rng, scale=rng.uniform(0.2, 1.5))
        g = to_grid(u, pad=PAD_FACTOR)
        w = _grid_weight(u.domain, g.shape)
        rhs = 0.25 * w * np.sum((g**2 + lam0 + a) ** 2) - (np.pi / 4) * (lam0 + a) ** 2
        assert lyapunov(u, a) >= rhs - 1e-10


# ---------------------------------------------------------------------------
# dissipation

def test_dissipation_zero(dom):
    assert dissipation(zero_field(dom), a=1.0) == 0.0


def test_dissipation_at_equilibrium(equilibria_a05):
    for e in equilibria_a05:
        assert abs(dissipation(e.state, 0.5)) <= (10 * e.residual) ** 2 + 1e-18


def test_dissipation_fd_on_trajectory(dom):
    # settle past the stiff transient first; then a first-order quotient at
    # dt = 1e-4 must match the closed-form decay rate within 1e-4
    model = ModelSpec("modified_swift_hohenberg", a=0.5, b=0.0, domain=dom)
    rng = np.random.default_rng(11)
    ic = random_field(dom, rng, scale=0.4, decay=1.0)
    settle = integrate(model, zero_forcing(dom), ic, 0.0,
                       IntegratorConfig(dt=1e-3, t_end=1.0, record_every=1000))
    u = SpectralField(settle.coeffs[-1], dom)
    dt = 1e-4
    probe = integrate(model, zero_forcing(dom), u, 0.0,
                      IntegratorConfig(dt=dt, t_end=2 * dt, record_every=1))
    fd = (probe.lyapunov[1] - probe.lyapunov[0]) / dt
    assert abs(fd - dissipation(u, 0.5)) <= 1e-4


# ---------------------------------------------------------------------------
# equilibria

def test_zero_seed_is_exact_root(dom):
    eqs = find_equilibria(1.7, 0.3, [zero_field(dom)])
    assert len(eqs) == 1
    assert eqs[0].residual == 0.0
    assert eqs[0].V == 0.0


def test_equilibria_a05(dom, equilibria_a05):
    eqs = equilibria_a05
    assert len(eqs) == 3  # 0 and the symmetric pair
    nontrivial = [e for e in eqs if e.state.l2() > 1e-6]
    assert len(nontrivial) == 2
    for e in nontrivial:
        assert e.V < 0.0
        assert e.residual <= 1e-10
        assert e.unstable_dim == 0
    zero = next(e for e in eqs if e.state.l2() <= 1e-6)
    assert zero.unstable_dim == 1
    # one-mode truncation predicts the amplitude within a few percent
    pred = single_mode_amplitude(-0.5) * np.sqrt(np.pi / 2)
    got = nontrivial[0].state.l2()
    assert abs(got - pred) / pred < 0.05


def test_symmetry_pair(equilibria_a05):
    nontrivial = [e for e in equilibria_a05 if e.state.l2() > 1e-6]
    e1, e2 = nontrivial
    assert e1.state.distance(e2.state.with_coeffs(-e2.state.coeffs)) < 1e-8
    assert abs(e1.V - e2.V) < 1e-12
    s1 = np.array([lam for lam, _ in e1.spectrum])
    s2 = np.array([lam for lam, _ in e2.spectrum])
    assert np.allclose(s1, s2, atol=1e-8)


def test_symmetry_broken_for_nonzero_b(dom):
    eqs = find_equilibria(0.5, 0.05, default_seeds(dom, 0.5))
    nontrivial = [e for e in eqs if e.state.l2() > 1e-6]
    assert len(nontrivial) == 2
    m1 = sorted(e.state.coeffs[0] for e in nontrivial)
    assert m1[0] < 0 < m1[1]
    assert abs(m1[0] + m1[1]) > 1e-3  # amplitudes genuinely differ


def test_jacobian_matches_finite_differences(dom):
    rng = np.random.default_rng(12)
    u = random_field(dom, rng, scale=0.5)
    for b in (0.0, 0.4):
        J = jacobian(u, 0.5, b)
        for _ in range(3):
            v = random_field(dom, rng, scale=1.0).coeffs
            eps = 1e-6
            fp = residual_coeffs(u.with_coeffs(u.coeffs + eps * v), 0.5, b)
            fm = residual_coeffs(u.with_coeffs(u.coeffs - eps * v), 0.5, b)
            fd = (fp - fm) / (2 * eps)
            assert np.linalg.norm(J @ v - fd) <= 1e-6 * np.linalg.norm(fd)


# ---------------------------------------------------------------------------
# index at the origin

def test_morse_index_zero_values(dom):
    spec = build_spectrum(dom)
    assert morse_index_zero(0.0, spec) == 1
    assert morse_index_zero(2.0, spec) == 0
    assert morse_index_zero(1.0, spec) == 0
    assert marginal_modes(1.0, spec) == [(1.0, 0.0, 1)]
    assert marginal_modes(0.0, spec) == []


def test_morse_index_monotone_in_a(dom):
    spec = build_spectrum(dom)
    grid = np.linspace(-5.0, 3.0, 33)
    vals = [morse_index_zero(a, spec) for a in grid]
    assert all(x >= y for x, y in zip(vals, vals[1:]))


def test_morse_index_2d_multiplicity():
    spec = build_spectrum(DomainSpec(2, (np.pi, np.pi), (4, 4)))
    # lambda(mu) = mu^2 - 2 mu + a: at a = -16 the doubly degenerate mu = 5
    # level is negative (25 - 10 - 16 = -1) and contributes multiplicity 2
    lad = lambda_ladder(spec, -16.0)
    by_mu = dict(zip(spec.mu, lad.entries))
    assert by_mu[5.0] == (-1.0, 2)
    assert morse_index_zero(-16.0, spec) == 3  # mu=2 (r=1) and mu=5 (r=2)


# ---------------------------------------------------------------------------
# stationary-value identity

def test_equilibrium_identity(equilibria_a05):
    for e in equilibria_a05:
        assert equilibrium_identity(e) <= 1e-8 * (1.0 + abs(e.V))


def test_equilibrium_identity_rejects_b(equilibria_a05):
    with pytest.raises(ValueError):
        equilibrium_identity(equilibria_a05[0], b=0.05)


def test_identity_sensitivity(dom, equilibria_a05):
    # perturbing a root by 1e-2 degrades the defect to roughly second order
    e = next(e for e in equilibria_a05 if e.state.l2() > 1e-6)
    pert = e.state.with_coeffs(e.state.coeffs + 1e-2 * mode_field(dom, 2, 1.0).coeffs)
    V = lyapunov(pert, 0.5)
    defect = abs(V + 0.25 * quad4(pert))
    assert defect > equilibrium_identity(e)
    assert defect < 1e-2


# ---------------------------------------------------------------------------
# V-monotonicity along simulated orbits

def test_v_nonincreasing_along_b0_trajectories(dom):
    model = ModelSpec("modified_swift_hohenberg", a=0.5, b=0.0, domain=dom)
    rng = np.random.default_rng(13)
    for _ in range(5):
        ic = random_field(dom, rng, scale=rng.uniform(0.1, 0.8), decay=1.0)
        traj = integrate(model, zero_forcing(dom), ic, 0.0,
                         IntegratorConfig(dt=1e-3, t_end=3.0, record_every=50))
        V = traj.lyapunov
        assert np.all(np.diff(V) <= 1e-8 * (1.0 + np.abs(V[:-1])))


# ---------------------------------------------------------------------------
# Morse decomposition

def test_morse_trivial_at_a2(dom):
    rep = morse_decomposition(2.0, 0.0, sample_count=2, domain=dom, t_end=20.0)
    assert rep.trivial
    assert rep.r_zero == 0
    assert rep.K0_members == []
    assert len(rep.equilibria) == 1  # only the origin survives
    # every sampled orbit decays to the origin
    assert all(c["to"] is not None for c in rep.connections)


def test_morse_a05(dom):
    rep = morse_decomposition(0.5, 0.0, sample_count=4, domain=dom, t_end=40.0)
    assert not rep.trivial
    assert rep.r_zero == 1
    assert len(rep.K0_members) == 2
    assert rep.unclassified == 0
    # {K0, {0}} partitions the inventory
    zero_ids = [i for i, e in enumerate(rep.equilibria) if e.state.l2() <= 1e-8]
    assert sorted(rep.K0_members + zero_ids) == list(range(len(rep.equilibria)))
    # connection evidence from the unstable direction of the origin to both wells
    shots = [c for c in rep.connections if c["seed"].startswith("unstable")]
    targets = {c["to"] for c in shots}
    assert targets == set(rep.K0_members)
    for c in shots:
        src_V = rep.equilibria[c["from"]].V
        dst_V = rep.equilibria[c["to"]].V
        assert src_V > dst_V  # gradient ordering


def test_morse_report_serialization(tmp_path, dom):
    rep = morse_decomposition(0.5, 0.0, sample_count=2, domain=dom, t_end=30.0)
    path = tmp_path / "equilibria.ndjson"
    rep.write_ndjson(path)
    import json

    recs = [json.loads(line) for line in path.read_text().strip().split("\n")]
    assert len(recs) == len(rep.equilibria)
    assert {r["in_K0"] for r in recs} == {True, False}
    row = rep.summary_row()
    assert row["count_K0"] == 2 and row["r_zero"] == 1 and row["min_V"] < 0

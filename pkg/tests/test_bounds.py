import numpy as np
import pytest

from shrec import (
    DomainSpec,
    ForcingComponent,
    ForcingModel,
    IntegratorConfig,
    ModelSpec,
    compute_R0,
    integrate,
    mode_field,
    random_field,
    verify_absorbing,
    verify_energy_inequality,
    verify_h2_regularization,
    zero_forcing,
)
from shrec.bounds import scalar_sup_integrand, write_bounds_csv


@pytest.fixture(scope="module")
def dom():
    return DomainSpec(1, (np.pi,), (64,))


def numeric_sup(linear, quartic, s_max=1e3):
    from scipy.optimize import minimize_scalar

    res = minimize_scalar(lambda s: -scalar_sup_integrand(s, linear, quartic),
                          bounds=(0.0, s_max), method="bounded",
                          options={"xatol": 1e-10})
    return float(max(-res.fun, 0.0))


# ---------------------------------------------------------------------------
# closed form

def test_R0_closed_form_example():
    # a=0, b~=0+ (limit), M=0, |O|=pi: R0^2 = 144 sqrt(pi)/8 = 18 sqrt(pi)
    c = compute_R0(0.0, 1e-12, 0.0, np.pi)
    assert abs(c.R0_squared - 18.0 * np.sqrt(np.pi)) < 1e-6
    c2 = compute_R0(0.0, 1.0, 0.0, np.pi)
    assert abs(c2.R0_squared - 144.0 * np.sqrt(np.pi) / (2.0 * 3.0)) < 1e-12


def test_R0_matches_numeric_maximization():
    rng = np.random.default_rng(30)
    for _ in range(10):
        a = rng.uniform(-2.0, 7.0)
        bt = rng.uniform(0.05, 1.95)
        M = rng.uniform(0.0, 2.0)
        om = rng.uniform(0.5, 10.0)
        c = compute_R0(a, bt, M, om)
        sup = numeric_sup(c.linear_coeff, c.quartic_coeff)
        assert abs(c.poly_sup_term - sup) <= 1e-9 * max(1.0, abs(sup))
        assert abs(c.R0_squared - (0.5 * M * M + sup)) <= 1e-9 * max(1.0, c.R0_squared)


def test_R0_pure_decay_regime():
    # a = 6 puts the linear coefficient at zero: only the forcing term remains
    c = compute_R0(6.0, 1.0, 0.0, np.pi)
    assert c.R0 == 0.0
    assert c.linear_coeff == 0.0


def test_R0_monotonicities():
    base = compute_R0(0.5, 1.0, 0.1, np.pi)
    assert compute_R0(0.5, 1.0, 0.5, np.pi).R0 >= base.R0
    assert compute_R0(-1.0, 1.0, 0.1, np.pi).R0 >= base.R0   # larger (12-2a)+
    assert compute_R0(0.5, 1.9, 0.1, np.pi).R0 >= base.R0    # b_tilde toward 2
    # forcing increment: R0^2 grows by exactly delta*M + delta^2/2
    d = 0.3
    bumped = compute_R0(0.5, 1.0, 0.1 + d, np.pi)
    assert abs((bumped.R0_squared - base.R0_squared) - (d * 0.1 + d * d / 2)) < 1e-12
    # the bound never dips below the forcing term alone
    assert base.R0 >= np.sqrt(0.5) * base.M


def test_R0_rejects_lost_coercivity():
    with pytest.raises(ValueError):
        compute_R0(0.0, 2.0, 0.0, np.pi)
    with pytest.raises(ValueError):
        compute_R0(0.0, 2.5, 0.0, np.pi)


def test_R0_variants_ordered():
    # penalty denominators |O|^p grow with p (for |O| > 1), so the sup does too
    cs = [compute_R0(0.0, 1.0, 0.0, np.pi, variant=v)
          for v in ("sqrt", "cauchy_schwarz", "measure")]
    assert cs[0].R0 < cs[1].R0 < cs[2].R0


# ---------------------------------------------------------------------------
# trajectory checks

@pytest.fixture(scope="module")
def decay_run(dom):
    model = ModelSpec("modified_swift_hohenberg", a=6.0, b=0.0, domain=dom)
    rng = np.random.default_rng(31)
    traj = integrate(model, zero_forcing(dom), random_field(dom, rng, scale=0.5, decay=1.0),
                     0.0, IntegratorConfig(dt=1e-3, t_end=10.0, record_every=5))
    return traj


def test_energy_inequality_zero_run(dom):
    model = ModelSpec("modified_swift_hohenberg", a=0.5, b=0.0, domain=dom)
    from shrec import zero_field

    traj = integrate(model, zero_forcing(dom), zero_field(dom), 0.0,
                     IntegratorConfig(dt=1e-3, t_end=0.2, record_every=10))
    consts = compute_R0(0.5, 1.0, 0.0, np.pi)
    rep = verify_energy_inequality(traj, consts, forcing_sup=0.0)
    assert rep.applicable and rep.max_violation == 0.0


def test_energy_inequality_decay_run(dom, decay_run):
    consts = compute_R0(6.0, 1.0, 0.0, np.pi)
    rep = verify_energy_inequality(decay_run, consts, forcing_sup=0.0)
    assert rep.applicable
    assert rep.max_violation <= 10.0 * decay_run.dt
    rep2 = verify_absorbing(decay_run, consts, forcing_sup=0.0)
    assert rep2.applicable
    assert rep2.max_violation <= 10.0 * decay_run.dt


def test_inapplicable_when_preconditions_fail(dom, decay_run):
    # trajectory b exceeds the certified b_tilde -> tagged, not a violation
    consts = compute_R0(6.0, 1.0, 0.0, np.pi)
    model_b = ModelSpec("modified_swift_hohenberg", a=6.0, b=1.5, domain=dom)
    from shrec import zero_field

    traj_b = integrate(model_b, zero_forcing(dom), zero_field(dom), 0.0,
                       IntegratorConfig(dt=1e-3, t_end=0.05, record_every=10))
    rep = verify_energy_inequality(traj_b, consts)
    assert not rep.applicable and "inapplicable" in rep.note
    rep2 = verify_absorbing(decay_run, consts, forcing_sup=0.5)  # M=0 certified
    assert not rep2.applicable


@pytest.fixture(scope="module")
def reentry_run(dom):
    # ||initial|| = 5 R0 for the forced desk scenario constants
    a, bt = 0.5, 1.0
    profile = mode_field(dom, 2, 1.0)
    profile = profile.with_coeffs(profile.coeffs / profile.l2())
    g = ForcingModel("quasiperiodic", (
        ForcingComponent(0.06, 1.0, 0.0, profile),
        ForcingComponent(0.04, np.sqrt(2.0), 0.0, profile),
    ))
    consts = compute_R0(a, bt, 0.1, np.pi)
    model = ModelSpec("modified_swift_hohenberg", a=a, b=0.05, domain=dom)
    rng = np.random.default_rng(32)
    ic = random_field(dom, rng, scale=5.0 * consts.R0, decay=1.5)
    traj = integrate(model, g, ic, 0.0,
                     IntegratorConfig(dt=2e-4, t_end=8.0, record_every=50))
    return traj, consts


def test_reentry_absorbing(reentry_run):
    traj, consts = reentry_run
    assert traj.error is None
    rep = verify_absorbing(traj, consts, forcing_sup=0.1)
    assert rep.applicable
    assert rep.max_violation <= 10.0 * traj.dt
    entry = dict(rep.extras)["ball_entry_time"]
    assert entry < np.log(25.0)  # enters the ball before t = ln 25
    # once inside, never leaves beyond the discrete slack
    s = traj.l2**2
    i0 = np.argmax(s <= consts.R0_squared)
    assert np.all(traj.l2[i0:] <= consts.R0 * (1.0 + 10.0 * traj.dt))


def test_reentry_energy_inequality(reentry_run):
    traj, consts = reentry_run
    rep = verify_energy_inequality(traj, consts, forcing_sup=0.1)
    assert rep.applicable
    assert rep.max_violation <= 10.0 * traj.dt


def test_forced_desk_scenario_margins(dom):
    # a = 0.5, b = 0.05, two-frequency forcing with sup 0.1
    profile = mode_field(dom, 2, 1.0)
    profile = profile.with_coeffs(profile.coeffs / profile.l2())
    g = ForcingModel("quasiperiodic", (
        ForcingComponent(0.06, 1.0, 0.0, profile),
        ForcingComponent(0.04, np.sqrt(2.0), 0.0, profile),
    ))
    model = ModelSpec("modified_swift_hohenberg", a=0.5, b=0.05, domain=dom)
    consts = compute_R0(0.5, 1.0, 0.1, np.pi)
    rng = np.random.default_rng(33)
    traj = integrate(model, g, random_field(dom, rng, scale=0.5), 0.0,
                     IntegratorConfig(dt=1e-3, t_end=30.0, record_every=50))
    r1 = verify_energy_inequality(traj, consts, forcing_sup=0.1)
    r2 = verify_absorbing(traj, consts, forcing_sup=0.1)
    assert r1.max_violation <= 10.0 * traj.dt
    assert r2.max_violation <= 10.0 * traj.dt


def test_h2_regularization(dom, decay_run):
    rep = verify_h2_regularization(decay_run)
    assert rep.applicable
    extras = dict(rep.extras)
    assert np.isfinite(extras["plateau"])
    # decay run: the curvature norm relaxes to zero after the transient
    tail = decay_run.h2[decay_run.times >= extras["dwell_start"]]
    assert np.all(np.diff(tail) <= 1e-12)
    assert tail[-1] < 1e-4


def test_bounds_csv(tmp_path, dom, decay_run):
    consts = compute_R0(6.0, 1.0, 0.0, np.pi)
    reports = [verify_energy_inequality(decay_run, consts, forcing_sup=0.0),
               verify_absorbing(decay_run, consts, forcing_sup=0.0),
               verify_h2_regularization(decay_run)]
    p = tmp_path / "bounds.csv"
    write_bounds_csv(p, reports)
    lines = p.read_text().strip().split("\n")
    assert lines[0] == "inequality,max_violation,margin_min,applicable"
    assert len(lines) == 4

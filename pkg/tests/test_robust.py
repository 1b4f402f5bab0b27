import math

import numpy as np
import pytest

from flowcomp.curves import interval_bound_log
from flowcomp.field import LAMBDA0, FieldSpec, error_schedule
from flowcomp.logmag import LN2_FIX, LogMagnitude
from flowcomp.machine import MachineSpec
from flowcomp.robust import (
    PerturbationSpec,
    contraction_check,
    contraction_speed_limit,
    gronwall_radius,
    resource_estimate,
    sample_perturbation,
    space_bound_of_norm,
    zero_perturbation,
)
from flowcomp.simulate import HaltingSetSpec, IntegratorConfig, simulate_input


def mk(q2, f, shift, name):
    return MachineSpec(name, 2, 1, 2, {(1, d): (q2, f(d), shift) for d in range(10)})


@pytest.fixture(scope="module")
def incrementer():
    return mk(2, lambda d: (d + 1) % 10, 0, "inc")


@pytest.fixture(scope="module")
def fs(incrementer):
    return FieldSpec(incrementer, n_bands=2, l_max=5)


@pytest.fixture(scope="module")
def schedule(fs):
    return error_schedule(fs)


# -- perturbations ----------------------------------------------------------


def test_amplitudes_below_caps(schedule):
    p = sample_perturbation(schedule, seed=1)
    for key, bump in p.bumps.items():
        assert bump.amplitude <= schedule.cap(*key)


def test_sup_norm_on_box(schedule):
    p = sample_perturbation(schedule, seed=2)
    rng = np.random.default_rng(0)
    cap = schedule.cap(0, 1)
    # K box for (i, l) = (0, 1) spans [0, 1] x [3/4, 9/4]
    for _ in range(2000):
        x = float(rng.uniform(0.0, 1.0))
        y = float(rng.uniform(0.75, 2.25))
        assert p.magnitude(x, y) <= cap


def test_support_restricted(schedule):
    p = sample_perturbation(schedule, seed=3)
    for x, y in ((0.1, 1.5), (0.5, 1.1), (0.9, 1.5), (1.5, 1.5)):
        assert p.magnitude(x, y).is_zero
    assert not p.magnitude(0.5, 1.5).is_zero


def test_zero_perturbation(schedule):
    z = zero_perturbation(schedule)
    sign, mag = z.normal_component(0.5, 0.5, -1.0, 0.0)
    assert sign == 0 and mag.is_zero


def test_seeds_differ(schedule):
    a = sample_perturbation(schedule, seed=1)
    b = sample_perturbation(schedule, seed=2)
    assert any(
        a.bumps[k].amplitude.diff_ln(b.bumps[k].amplitude) != 0.0 for k in a.bumps
    )


def test_deterministic_per_seed(schedule):
    a = sample_perturbation(schedule, seed=9)
    b = sample_perturbation(schedule, seed=9)
    assert all(
        a.bumps[k].amplitude.diff_ln(b.bumps[k].amplitude) == 0.0
        and a.bumps[k].sign == b.bumps[k].sign
        for k in a.bumps
    )


def test_verdict_stable_under_perturbation(fs, schedule):
    cfg = IntegratorConfig(l_max=5)
    hs = HaltingSetSpec.from_digits(2, {0: 1})
    base, base_hit, _ = simulate_input(fs, 0, hs, cfg)
    for seed in range(5):
        p = sample_perturbation(schedule, seed)
        v, hit, traj = simulate_input(fs, 0, hs, cfg, perturbation=p)
        assert (v.kind, hit) == (base.kind, base_hit)
        # confinement: every crossing well inside the quarter-interval bound
        for e in traj.events:
            if e.rho_sign == 0:
                continue
            bound = interval_bound_log(fs.machine.m, 0, e.height) - LogMagnitude(
                2 * LN2_FIX, 0.0
            )
            assert e.rho_ln < bound


# -- contraction ------------------------------------------------------------


def test_contraction_passes_below_speed_limit(incrementer):
    lim = contraction_speed_limit(incrementer.m, 0, 0)
    rep = contraction_check(incrementer, lam=0.5 * lim, band=0, height=0, j=1)
    assert rep["ok"] and rep["worst_margin"] > 0.0


def test_contraction_fails_at_large_speed(incrementer):
    rep = contraction_check(incrementer, lam=100 * LAMBDA0, band=0, height=0, j=1)
    assert not rep["ok"] and rep["worst_margin"] < 0.0


def test_contraction_deep_level(incrementer):
    # the admissible speed shrinks double-exponentially with the level
    lim = contraction_speed_limit(incrementer.m, 1, 4)
    assert lim < contraction_speed_limit(incrementer.m, 0, 0)
    rep = contraction_check(incrementer, lam=0.5 * lim, band=1, height=4, j=2,
                            n_probes=5)
    assert rep["ok"]


def test_contraction_rejects_bad_j(incrementer):
    with pytest.raises(ValueError):
        contraction_check(incrementer, lam=1e-5, band=0, height=0, j=0)


# -- Gronwall ---------------------------------------------------------------


def test_gronwall_formula(schedule):
    eps_k = schedule.cap(0, 0)
    b = gronwall_radius(schedule.M, schedule.tau, eps_k)
    expected = eps_k + (schedule.M * schedule.tau - math.log(schedule.M))
    assert b.diff_ln(expected) == pytest.approx(0.0, abs=1e-6)
    # the schedule is built so the bound lands at eps0 * min(eps/2, A/8)
    from flowcomp.curves import interval_bound_log as ibl

    target = ibl(2, 0, 1) + (math.log(schedule.eps0) - 3 * math.log(2))
    assert b.diff_ln(target) == pytest.approx(0.0, abs=1e-6)


def test_gronwall_zero_and_monotone():
    assert gronwall_radius(1.0, 1.0, 0.0).is_zero
    a = gronwall_radius(1.0, 1.0, 1e-3)
    b = gronwall_radius(1.0, 2.0, 1e-3)
    c = gronwall_radius(1.0, 1.0, 2e-3)
    assert a < b and a < c
    with pytest.raises(ValueError):
        gronwall_radius(0.0, 1.0, 1e-3)


def test_gronwall_small_mtau_uses_expm1():
    b = gronwall_radius(2.0, 0.01, 1.0)
    assert b.ln() == pytest.approx(math.log(math.expm1(0.02) / 2.0))


# -- resource estimates -----------------------------------------------------


def test_resource_nested_forms():
    r = resource_estimate(1.0, 1.0)
    assert r.lnln_h1() == pytest.approx(math.e, abs=1e-12)
    # ln eps = ln C - e^{e^{C s_b}}: fixed part is the double exponential
    assert r.ln_eps.fix == -r.ln_h1.fix
    assert r.ln_eps.ln() == pytest.approx(-math.exp(math.e), rel=1e-12)


def test_resource_monotone():
    rs = [resource_estimate(s, 1.0) for s in (1.0, 2.0, 3.0, 5.0)]
    for a, b in zip(rs, rs[1:]):
        assert b.ln_h1 > a.ln_h1
        assert b.ln_eps < a.ln_eps


def test_resource_inverse_reading():
    r = resource_estimate(4.0, 1.5)
    assert space_bound_of_norm(r.ln_h1, 1.5) == pytest.approx(4.0, rel=1e-9)


def test_resource_domain():
    with pytest.raises(ValueError):
        resource_estimate(0.5, 1.0)
    with pytest.raises(OverflowError):
        resource_estimate(20.0, 1.0)


def test_resource_huge_but_exact():
    # e^{C s_b} ~ 22026: the double exponential has ~9600 digits, kept exact
    r = resource_estimate(10.0, 1.0)
    assert r.ln_h1.fix > 10 ** 9500
    assert space_bound_of_norm(r.ln_h1, 1.0) == pytest.approx(10.0, rel=1e-12)

import math

import numpy as np
import pytest

from flowcomp.field import FieldSpec
from flowcomp.machine import (
    LOOP,
    Configuration,
    Halted,
    MachineSpec,
    OutOfMemory,
    TapeBoundedSpec,
    run,
    run_bounded,
)
from flowcomp.simulate import (
    MISS,
    ChartTrajectory,
    ConfinementError,
    EventRecord,
    HaltingSetSpec,
    InsideBox,
    IntegratorConfig,
    SimulationVerdict,
    _RhoState,
    classify_crossing,
    event_rows,
    format_verdict,
    integrate_chart,
    ns_time_budget,
    simulate_bounded,
    simulate_input,
    trajectory_rows,
)


def mk(q2, f, shift, name):
    return MachineSpec(name, 2, 1, 2, {(1, d): (q2, f(d), shift) for d in range(10)})


@pytest.fixture(scope="module")
def incrementer():
    return mk(2, lambda d: (d + 1) % 10, 0, "inc")


@pytest.fixture(scope="module")
def spinner():
    return mk(1, lambda d: d, 0, "spin")


@pytest.fixture(scope="module")
def right_filler():
    return mk(1, lambda d: 9, 1, "fill")


@pytest.fixture(scope="module")
def fs(incrementer):
    return FieldSpec(incrementer, n_bands=2, l_max=6)


CFG = IntegratorConfig(l_max=5)


def test_on_curve_trajectory_stays_on_curve(fs):
    traj = integrate_chart(fs, 0, (0.0, 0.0), cfg=CFG)
    assert len(traj.events) == 5
    assert all(e.rho_sign == 0 for e in traj.events)
    assert all(isinstance(e.classification, InsideBox) for e in traj.events)


def test_rho_exact_decay(fs):
    traj = integrate_chart(fs, 0, (0.0, 1e-3), cfg=CFG)
    for e in traj.events:
        assert e.rho_sign == 1
        assert e.rho_ln.ln() == pytest.approx(math.log(1e-3) - e.t, rel=1e-12)


def test_crossing_time_lower_bound(fs):
    traj = integrate_chart(fs, 0, (0.0, 0.0), cfg=CFG)
    ts = np.array([0.0] + [e.t for e in traj.events])
    ss = np.array([0.0] + [e.s for e in traj.events])
    assert np.all(np.diff(ts) > np.diff(ss) / (16 * fs.lam))
    assert np.all(np.diff(ts) >= 1.0 / (16 * fs.lam))


def test_events_strictly_increasing(fs):
    traj = integrate_chart(fs, 0, (0.0, 0.0), cfg=CFG)
    hs = [e.height for e in traj.events]
    assert hs == sorted(hs) and len(set(hs)) == len(hs)
    ss = [s for _, s, _, _ in traj.samples]
    assert all(b >= a for a, b in zip(ss, ss[1:]))


def test_confinement_error_on_bad_start(fs):
    with pytest.raises(ConfinementError):
        integrate_chart(fs, 0, (0.0, 0.07), cfg=CFG)


def test_classify_center_and_miss(fs):
    inside = classify_crossing(fs, 0, 1, _RhoState.from_float(0.0))
    assert inside == InsideBox(2, 1, 0)
    # 1/32 >> the half-width 1/(2**7 * 3) of the configuration at height 1
    assert classify_crossing(fs, 0, 1, _RhoState.from_float(1.0 / 32.0)) is MISS


def test_classify_quarter_interval_bound(fs):
    # |rho| = A_{i,l}/4 is strictly inside the interval half-width
    from flowcomp.curves import interval_bound_log
    from flowcomp.logmag import LN2_FIX, LogMagnitude

    a4 = interval_bound_log(fs.machine.m, 0, 1) - LogMagnitude(2 * LN2_FIX, 0.0)
    cls = classify_crossing(fs, 0, 1, _RhoState(1, a4))
    assert isinstance(cls, InsideBox)


def test_simulate_halting_and_hit(fs, incrementer):
    hs = HaltingSetSpec.from_digits(2, {0: 1})
    v, hit, _ = simulate_input(fs, 0, hs, CFG)
    assert v.kind == "HALTED" and v.height == 1 and hit
    oracle = run(incrementer, Configuration(1, 0, 0), 20)
    assert isinstance(oracle, Halted) and oracle.config.r == v.config.r


def test_simulate_mismatched_constraint(fs):
    hs = HaltingSetSpec.from_digits(2, {0: 5})
    v, hit, _ = simulate_input(fs, 0, hs, CFG)
    assert v.kind == "HALTED" and not hit


def test_simulate_second_input(fs):
    # input 1 has tape digit 1 at the head; output digit is 2
    hs = HaltingSetSpec.from_digits(2, {0: 2})
    v, hit, _ = simulate_input(fs, 1, hs, CFG)
    assert v.kind == "HALTED" and hit


def test_simulate_looping(spinner):
    fss = FieldSpec(spinner, n_bands=1, l_max=6)
    v, hit, _ = simulate_input(fss, 0, HaltingSetSpec.from_digits(2, {0: 0}), CFG)
    assert v.kind == "UNRESOLVED" and v.budget == 5 and not hit


def test_bounded_three_cases(incrementer, spinner, right_filler):
    window = 4.5
    cfg = IntegratorConfig(l_max=6, window=window)
    cases = [
        (incrementer, TapeBoundedSpec(incrementer, -2, 2)),
        (spinner, TapeBoundedSpec(spinner, -2, 2)),
        (right_filler, TapeBoundedSpec(right_filler, -1, 1)),
    ]
    kinds = {Halted: "HALTED", OutOfMemory: "OOM"}
    for machine, bnd in cases:
        fsb = FieldSpec(machine, n_bands=1, l_max=6)
        got = simulate_bounded(fsb, bnd, 0, cfg)
        oracle = run_bounded(bnd, Configuration(machine.q0, 0, 0), 200)
        want = "LOOP" if oracle is LOOP else kinds[type(oracle)]
        assert got.kind == want, machine.name


def test_bounded_halt_height_matches_oracle_steps(incrementer):
    bnd = TapeBoundedSpec(incrementer, -2, 2)
    fsb = FieldSpec(incrementer, n_bands=1, l_max=6)
    got = simulate_bounded(fsb, bnd, 0, IntegratorConfig(l_max=6, window=10.0))
    oracle = run_bounded(bnd, Configuration(1, 0, 0), 100)
    assert got.kind == "HALTED" and got.height == oracle.steps


def test_bounded_requires_window(fs):
    bnd = TapeBoundedSpec(fs.machine, -2, 2)
    with pytest.raises(ValueError):
        simulate_bounded(fs, bnd, 0, IntegratorConfig(l_max=5))


def test_small_window_never_wrong_halted(spinner):
    # budget smaller than the window: must stay honest with UNRESOLVED
    fss = FieldSpec(spinner, n_bands=1, l_max=3)
    bnd = TapeBoundedSpec(spinner, -2, 2)
    got = simulate_bounded(fss, bnd, 0, IntegratorConfig(l_max=3, window=50.0))
    assert got.kind == "UNRESOLVED"


def test_halting_set_spec():
    hs = HaltingSetSpec.from_digits(2, {0: 1, -1: 3})
    assert hs.k == 1
    assert hs.matches(Configuration(2, 1, 3))
    assert not hs.matches(Configuration(2, 1, 0))
    assert not hs.matches(Configuration(1, 1, 3))
    # every position within -k..k is pinned (unspecified ones to blank)
    assert not hs.matches(Configuration(2, 91, 3))
    # positions beyond the constraint are unconstrained
    assert hs.matches(Configuration(2, 901, 3))


def test_ns_time_budget():
    m, warp = ns_time_budget(1.0, 1.0, 10.0)
    assert m == 11
    assert warp(0.0) == 0.0
    t = np.linspace(0.0, 30.0, 200)
    w = warp(t)
    assert np.all(np.diff(w) > 0.0)  # strictly increasing until double saturation
    assert float(warp(1e6)) == pytest.approx(11.0)
    assert float(warp(1e6)) < 11.0 + 1e-9
    with pytest.raises(ValueError):
        ns_time_budget(0.0, 1.0, 1.0)


def test_format_verdict():
    assert format_verdict(SimulationVerdict("LOOP")) == "LOOP"
    assert format_verdict(SimulationVerdict("UNRESOLVED", budget=7)) == "UNRESOLVED 7"
    v = SimulationVerdict("HALTED", Configuration(2, 1, 0), 3)
    assert format_verdict(v) == "HALTED 2 1 0 3"


def test_export_rows(fs):
    traj = integrate_chart(fs, 0, (0.0, 1e-3), cfg=IntegratorConfig(l_max=2))
    ev = event_rows(traj)
    assert ev[0][:3] == (0, 1, "InsideBox")
    rows = trajectory_rows(traj)
    assert all(len(r) == 6 for r in rows)
    assert rows[0][4] == 0 and rows[0][5] == 1

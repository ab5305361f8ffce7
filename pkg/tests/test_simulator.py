import math
from dataclasses import replace

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from trimode_gripper.errors import InfeasibleScenario, InvalidParams
from trimode_gripper.modes import EventKind
from trimode_gripper.params import HALF_PI, MechParams, Mode
from trimode_gripper.scenario_io import load_preset, preset_names
from trimode_gripper.simulator import (
    COLUMNS,
    Scenario,
    run,
    run_smsA_bench,
    run_smsB_bench,
    write_trace,
)
from trimode_gripper.statics import (
    clutch_ceiling,
    grasp_equilibrium_tip_force,
    pull_in_chain_torque,
    screw_advance_per_radian,
)

FB, G, PI = Mode.FINGER_BENDING, Mode.GRASPING, Mode.PULL_IN
OPEN_LOOP = [n for n in preset_names() if n.startswith("fig")]


@pytest.fixture(scope="module")
def fig8a():
    return run(load_preset("fig8a"))


def test_fig8a_shape(fig8a):
    tr = fig8a
    assert tr.mode_sequence() == [FB, G, PI]
    modes = tr.modes
    theta_f, d_f, f = tr.column("theta_f"), tr.column("d_f"), tr.column("f_tip")
    bend = np.array([m == FB for m in modes])
    assert np.all(d_f[bend] == 0.0)
    assert theta_f[bend].max() <= HALF_PI
    after = np.array([m != FB for m in modes])
    assert np.all(theta_f[after] == HALF_PI)
    assert np.all(np.diff(d_f[after]) >= 0)
    touch = next(e.time for e in tr.events if e.kind == EventKind.TIP_CONTACT)
    assert np.all(f[tr.column("t") < touch] == 0.0)
    assert f[-1] > 0


def test_fig8a_event_times(fig8a):
    ev = {e.kind: e for e in fig8a.events}
    p = fig8a.scenario.params
    speed = fig8a.scenario.motor_speed
    t_stop = (HALF_PI + 0.0) / speed
    assert ev[EventKind.STOPPER_ENGAGED].time == pytest.approx(t_stop, abs=1e-8)
    t_touch = t_stop + 0.010 / screw_advance_per_radian(p) / speed
    assert ev[EventKind.TIP_CONTACT].time == pytest.approx(t_touch, abs=1e-8)
    assert ev[EventKind.CLUTCH_SLIP_START].state.f_tip > 0
    times = [e.time for e in fig8a.events]
    assert times == sorted(times)


def test_stopper_events_only_at_limits():
    for name in ("fig8a", "fig17"):
        for e in run(load_preset(name)).events:
            if e.kind == EventKind.STOPPER_ENGAGED:
                assert e.state.theta_f in (0.0, HALF_PI)


def test_pull_in_torque_constant(fig8a):
    p = fig8a.scenario.params
    rows = [r for r in fig8a.rows if r.state.mode == PI and r.state.slip_angle >= p.phi_slip]
    assert rows
    assert all(r.tau_rc2 == pytest.approx(pull_in_chain_torque(p)) for r in rows)


@pytest.mark.parametrize("name", OPEN_LOOP)
def test_kinematic_identities_exact(name):
    tr = run(load_preset(name))
    p = tr.scenario.params
    for r in tr.rows:
        assert r.tau_m == 2.0 * r.tau_rc2
        assert r.state.d_pi == p.epsilon * p.r_roller * r.state.theta_m_pi
        assert 0.0 <= r.state.theta_f <= HALF_PI


def test_grasp_rows_satisfy_equilibrium(fig8a):
    p = fig8a.scenario.params
    rows = [r for r in fig8a.rows if r.state.mode == G and r.state.f_tip > 0]
    assert len(rows) > 100
    for r in rows:
        assert grasp_equilibrium_tip_force(r.tau_m, p) == pytest.approx(r.state.f_tip, rel=1e-6)


def test_energy_motor_work_covers_tip_work():
    scn = load_preset("fig8a")
    scn = replace(scn, params=replace(scn.params, delta_f=0.0, delta_tau=0.0))
    tr = run(scn)
    for a, b in zip(tr.rows, tr.rows[1:]):
        if a.state.mode == b.state.mode == G and a.state.contact:
            dth = b.state.theta_m - a.state.theta_m
            w_motor = 0.5 * (a.tau_rc2 + b.tau_rc2) * dth
            w_tip = 0.5 * (a.state.f_tip + b.state.f_tip) * (b.state.d_f - a.state.d_f)
            assert w_motor >= w_tip - 1e-15
    q = replace(scn.params, mu_kn=0.0, mu_st=0.0)
    tr0 = run(replace(scn, params=q, bench="smsA", initial_theta_f=HALF_PI, duration=40.0))
    w_m = sum(0.5 * (a.tau_rc2 + b.tau_rc2) * (b.state.theta_m - a.state.theta_m)
              for a, b in zip(tr0.rows, tr0.rows[1:]))
    w_t = sum(0.5 * (a.state.f_tip + b.state.f_tip) * (b.state.d_f - a.state.d_f)
              for a, b in zip(tr0.rows, tr0.rows[1:]))
    assert w_m == pytest.approx(w_t, rel=1e-6)


@pytest.mark.parametrize("name", ["fig8a", "fig8c", "fig10b", "fig11", "fig17"])
def test_dt_halving_converges(name):
    scn = load_preset(name).deterministic()
    a, b = run(scn), run(replace(scn, dt=scn.dt / 2))
    assert [r.state.mode for r in a.rows] == [r.state.mode for r in b.rows[::2]]
    for c in COLUMNS[1:-1]:
        x, y = a.column(c), b.column(c)[::2]
        scale = max(np.abs(x).max(), 1e-300)
        assert np.abs(x - y).max() <= 1e-3 * scale


def test_same_seed_same_bytes():
    scn = load_preset("fig8b")
    assert run(scn).to_csv() == run(scn).to_csv()
    assert run(scn).to_csv() != run(replace(scn, seed=scn.seed + 1)).to_csv()


def test_noise_flags_chatter_at_small_lead_angle():
    tr = run(load_preset("fig8b"))
    assert tr.chatter and tr.chatter_flips > 0
    assert not run(load_preset("fig8a")).chatter


def test_smsB_peak_ordering_and_settling():
    peaks = {}
    for name in ("fig10a", "fig10b"):
        tr = run(load_preset(name))
        p = tr.scenario.params
        tau = tr.column("tau_rc2")
        peaks[name] = tau.max()
        assert tau.max() <= clutch_ceiling(p) + 1e-12
        assert tau[-1] == pytest.approx(pull_in_chain_torque(p))
        th_f, th_sp2 = tr.column("theta_f"), tr.column("theta_sp2")
        together = th_f < HALF_PI
        assert np.array_equal(th_f[together], th_sp2[together])
        assert th_sp2[-1] > th_f[-1] == HALF_PI
    assert peaks["fig10b"] > peaks["fig10a"]


def test_smsB_zero_preload_never_bends():
    tr = run(load_preset("fig10c"))
    assert tr.mode_sequence()[0] == PI
    assert np.all(tr.column("theta_f") == 0.0)
    assert tr.column("theta_sp2")[-1] == pytest.approx(math.pi)


def test_bench_helpers():
    tr = run_smsB_bench(Scenario(duration=2.0))
    assert tr.scenario.bench == "smsB" and tr.scenario.object is None
    q = replace(MechParams(), delta_f=0.0, delta_tau=0.0, tau_joint=0.0)
    tr = run_smsA_bench(Scenario(params=q, initial_theta_f=HALF_PI, duration=60.0))
    assert PI not in tr.mode_sequence() and tr.stop_reason == "torque_cap"
    assert tr.final.tau_m == pytest.approx(0.8, abs=1e-9)
    assert tr.final.state.f_tip == pytest.approx(grasp_equilibrium_tip_force(0.8, q), rel=1e-9)


def test_release_profile():
    tr = run(load_preset("fig17"))
    assert tr.mode_sequence() == [FB, G, FB, G]
    kinds = [e.kind for e in tr.events]
    lock = kinds.index(EventKind.TIP_FRICTION_LOCK)
    assert kinds.index(EventKind.TIP_FRICTION_RELEASE, lock) > lock
    assert tr.stop_reason == "fully_open"
    assert tr.final.state.theta_f == 0.0 and tr.final.state.d_f == 0.0


def test_stuck_start_is_infeasible():
    q = replace(MechParams(), delta_f=0.0, delta_tau=0.0, tau_joint=0.0)
    with pytest.raises(InfeasibleScenario) as ei:
        run(Scenario(params=q, duration=1.0))
    assert ei.value.condition and ei.value.time == 0.0


@pytest.mark.parametrize("changes", [{"dt": 0.0}, {"motor_speed": 0.0}, {"torque_cap": -1.0},
                                     {"bench": "smsC"}, {"noise_delta_f": (0.5, 0.1)},
                                     {"initial_theta_f": 2.0}])
def test_invalid_scenarios(changes):
    with pytest.raises(InvalidParams):
        run(replace(Scenario(), **changes))


def test_write_trace(tmp_path, fig8a):
    paths = write_trace(fig8a, tmp_path)
    lines = paths["trace"].read_text().splitlines()
    assert lines[0] == ",".join(COLUMNS) and len(lines) == len(fig8a) + 1
    assert paths["events"].read_text().count("\n") == len(fig8a.events)
    assert '"library_version"' in paths["metadata"].read_text()


segments = st.lists(st.tuples(st.sampled_from([-14.0, -7.0, 7.0, 14.0, 30.0]),
                              st.floats(0.5, 12.0)), min_size=1, max_size=4)


@settings(max_examples=25)
@given(segments, st.floats(0.0, 0.02))
def test_finger_angle_bounded_under_any_profile(segs, gap):
    profile = tuple((math.radians(v), d) for v, d in segs)
    from trimode_gripper.contact import ObjectModel
    tr = run(Scenario(object=ObjectModel(gap0=gap), profile=profile, dt=0.02))
    th = tr.column("theta_f")
    assert th.min() >= 0.0 and th.max() <= HALF_PI
    assert np.all(tr.column("d_f") >= 0.0)
    times = [e.time for e in tr.events]
    assert times == sorted(times)

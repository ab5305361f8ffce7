import math
from dataclasses import replace

import pytest
from hypothesis import given, strategies as st

from trimode_gripper.errors import StuckState
from trimode_gripper.modes import (
    EventKind,
    chain_torque_capacity,
    classify_motion,
    fingertip_obstructed,
    release_sequence,
    step_transition,
)
from trimode_gripper.params import HALF_PI, Direction, GripperState, MechParams, Mode
from trimode_gripper.statics import clutch_ceiling

P = MechParams()
FWD, REV = Direction.FORWARD, Direction.REVERSE
EXTENDED = GripperState()
BENT = GripperState(theta_f=HALF_PI, theta_sp2=HALF_PI, stopper_engaged=True)


def test_extended_finger_bends_first():
    assert classify_motion(EXTENDED, 0.0, FWD, P) == Mode.FINGER_BENDING


def test_bent_finger_grasps():
    tau = chain_torque_capacity(BENT, FWD, P)
    assert tau == clutch_ceiling(P)
    assert classify_motion(BENT, 0.9 * tau, FWD, P) == Mode.GRASPING


def test_stalled_grasp_pulls_in():
    s = replace(BENT, f_tip=40.0, mode=Mode.GRASPING)
    assert classify_motion(s, clutch_ceiling(P) * 1.01, FWD, P) == Mode.PULL_IN


def test_zero_preload_pulls_in_first():
    q = replace(P, t_scw=0.0, tau_pre_kn=0.0)
    assert classify_motion(EXTENDED, q.tau_joint, FWD, q) == Mode.PULL_IN


def test_clutch_lock_blocks_pull_in():
    s = replace(BENT, f_tip=40.0)
    assert classify_motion(s, 1.0, FWD, P, clutch_locked=True) == Mode.GRASPING


def test_stuck_state_raises():
    q = replace(P, delta_f=0.0, delta_tau=0.0)
    with pytest.raises(StuckState):
        classify_motion(EXTENDED, 0.0, FWD, q)


def test_noise_box_flags_chatter():
    q = replace(P, lam=math.radians(20))
    noise = ((0.2, 0.8), (0.0005, 0.003))
    assert classify_motion(EXTENDED, q.tau_joint, FWD, q, noise=noise) == Mode.CHATTER
    assert classify_motion(EXTENDED, P.tau_joint, FWD, P, noise=((0.45, 0.55), (0.0009, 0.0011))) \
        == Mode.FINGER_BENDING


def test_obstruction_rules():
    assert not fingertip_obstructed(EXTENDED, FWD, P)
    assert fingertip_obstructed(EXTENDED, REV, P)
    assert fingertip_obstructed(BENT, FWD, P)
    assert fingertip_obstructed(replace(EXTENDED, tip_friction_lock=True), FWD, P)


def test_stopper_event_on_crossing():
    s = replace(EXTENDED, theta_f=HALF_PI, theta_sp2=HALF_PI)
    new, events = step_transition(s, Mode.GRASPING, t=6.4, p=P)
    kinds = [e.kind for e in events]
    assert EventKind.STOPPER_ENGAGED in kinds and new.stopper_engaged
    assert all(e.time == 6.4 for e in events)


def test_no_flag_change_no_event():
    _, events = step_transition(EXTENDED, Mode.FINGER_BENDING, p=P)
    assert events == []


def test_reversal_with_load_locks_tip():
    s = replace(BENT, mode=Mode.GRASPING, f_tip=28.0, contact=True)
    new, events = step_transition(s, Mode.GRASPING, direction=REV, p=P)
    assert new.tip_friction_lock
    assert {e.kind for e in events} == {EventKind.TIP_FRICTION_LOCK, EventKind.STOPPER_RELEASED}
    assert classify_motion(new, chain_torque_capacity(new, REV, P), REV, P) == Mode.GRASPING
    released, ev = step_transition(replace(new, f_tip=0.0), Mode.GRASPING, p=P)
    assert not released.tip_friction_lock
    assert EventKind.TIP_FRICTION_RELEASE in [e.kind for e in ev]


def test_slip_events():
    s, ev = step_transition(BENT, Mode.PULL_IN, p=P)
    assert [e.kind for e in ev] == [EventKind.CLUTCH_SLIP_START]
    s = replace(s, slip_angle=0.3)
    s2, ev = step_transition(s, Mode.GRASPING, p=P)
    assert [e.kind for e in ev] == [EventKind.CLUTCH_SLIP_STOP] and s2.slip_angle == 0.0


def test_release_sequences():
    grasp = replace(BENT, mode=Mode.GRASPING, f_tip=28.0, contact=True)
    assert release_sequence(grasp, P) == [Mode.GRASPING, Mode.FINGER_BENDING, Mode.GRASPING]
    empty = replace(BENT, mode=Mode.GRASPING)
    assert release_sequence(empty, P) == [Mode.FINGER_BENDING, Mode.GRASPING]
    closed = replace(EXTENDED, mode=Mode.GRASPING, f_tip=10.0, contact=True)
    assert release_sequence(closed, P) == [Mode.GRASPING]


@given(st.floats(0.0, HALF_PI), st.floats(0.0, 80.0), st.sampled_from([FWD, REV]),
       st.booleans())
def test_classification_deterministic(theta_f, f, d, lock):
    s = GripperState(theta_f=theta_f, theta_sp2=theta_f, f_tip=f, tip_friction_lock=lock and f > 0)
    tau = chain_torque_capacity(s, d, P)
    assert classify_motion(s, tau, d, P) == classify_motion(s, tau, d, P)

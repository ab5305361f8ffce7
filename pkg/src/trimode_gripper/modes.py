"""Mode-switching automaton: which motion the single motor produces next."""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from enum import Enum

from .errors import StuckState
from .params import Direction, GripperState, MechParams, Mode
from .statics import (
    clutch_ceiling,
    clutch_slip_condition,
    rotation_condition,
    slipping_clutch_torque,
    translation_condition,
)


class EventKind(str, Enum):
    STOPPER_ENGAGED = "StopperEngaged"
    STOPPER_RELEASED = "StopperReleased"
    TIP_CONTACT = "TipContact"
    CLUTCH_SLIP_START = "ClutchSlipStart"
    CLUTCH_SLIP_STOP = "ClutchSlipStop"
    TIP_FRICTION_LOCK = "TipFrictionLock"
    TIP_FRICTION_RELEASE = "TipFrictionRelease"

    def __str__(self):
        return self.value


@dataclass(frozen=True)
class TransitionEvent:
    kind: EventKind
    time: float
    state: GripperState

    def as_record(self) -> dict:
        return {"time": self.time, "kind": self.kind.value, "state": self.state.as_record()}


def fingertip_obstructed(s: GripperState, direction: Direction, p: MechParams) -> bool:
    """Whether the fingertip unit is blocked from turning in ``direction``."""
    if s.tip_friction_lock:
        return True
    if direction == Direction.FORWARD:
        return s.theta_f >= p.theta_f_stop
    return s.theta_f <= 0.0


def chain_torque_capacity(s: GripperState, direction: Direction, p: MechParams,
                          clutch_locked: bool = False) -> float:
    """Largest chain torque the fingertip side can react before it gives way.

    A free fingertip only resists with its joint torque.  A blocked one holds
    up to the clutch ceiling (unbounded when the clutch is locked), or the
    decaying slip torque once the clutch is already slipping.
    """
    if not fingertip_obstructed(s, direction, p):
        return p.tau_joint
    if clutch_locked:
        return math.inf
    if s.mode == Mode.PULL_IN:
        return slipping_clutch_torque(s.slip_angle, p)
    return clutch_ceiling(p)


def _decide(s, tau_rc2, direction, p, clutch_locked):
    if not clutch_locked and clutch_slip_condition(tau_rc2, p):
        return Mode.PULL_IN
    obstructed = fingertip_obstructed(s, direction, p)
    rot = rotation_condition(s.f_tip, tau_rc2, p)
    # opening is back-driven by the tip load, so only residual friction resists it
    f_open = s.f_tip if direction == Direction.FORWARD else 0.0
    trans = translation_condition(f_open, tau_rc2, p)
    if obstructed:
        if direction == Direction.REVERSE and trans:
            return Mode.GRASPING
        if rot and not clutch_locked:
            return Mode.PULL_IN
        if trans:
            return Mode.GRASPING
    else:
        if rot:
            return Mode.FINGER_BENDING
        if trans:
            return Mode.GRASPING
    raise StuckState(
        f"neither the rotation nor the translation condition holds "
        f"(f_tip={s.f_tip:.6g} N, tau_rc2={tau_rc2:.6g} N m)",
    )


def classify_motion(s: GripperState, tau_rc2: float, direction: Direction, p: MechParams,
                    *, clutch_locked: bool = False, noise=None) -> Mode:
    """Select the active mode for chain torque ``tau_rc2``.

    ``noise`` is an optional ``((df_lo, df_hi), (dtau_lo, dtau_hi))`` pair of
    residual-friction ranges.  If different corners of that box select
    different modes the result is ``Mode.CHATTER``.
    """
    direction = Direction(direction)
    if noise is None:
        return _decide(s, tau_rc2, direction, p, clutch_locked)
    (df_lo, df_hi), (dt_lo, dt_hi) = noise
    outcomes = set()
    for df in (df_lo, df_hi):
        for dt in (dt_lo, dt_hi):
            q = replace(p, delta_f=df, delta_tau=dt)
            try:
                outcomes.add(_decide(s, tau_rc2, direction, q, clutch_locked))
            except StuckState:
                outcomes.add(None)
    if outcomes == {None}:
        raise StuckState("no residual-friction corner admits motion")
    if len(outcomes) > 1:
        return Mode.CHATTER
    return outcomes.pop()


def step_transition(s: GripperState, m: Mode, *, t: float = 0.0, direction=None,
                    contact: bool | None = None, p: MechParams | None = None):
    """Apply mode ``m`` and refresh the contact flags.

    Returns ``(new_state, events)``; ``events`` is empty when no flag changed.
    """
    p = p or MechParams()
    direction = s.direction if direction is None else Direction(direction)
    lock = s.tip_friction_lock
    if direction != s.direction and s.f_tip > 0:
        lock = True
    if lock and s.f_tip <= 0:
        lock = False
    if direction == Direction.FORWARD:
        stopper = s.theta_f >= p.theta_f_stop
    else:
        stopper = s.theta_f <= 0.0
    contact = s.contact if contact is None else contact
    new = replace(
        s, mode=m, direction=direction, stopper_engaged=stopper,
        tip_friction_lock=lock, contact=contact,
        slip_angle=s.slip_angle if m == Mode.PULL_IN else 0.0,
    )
    events = []

    def edge(before, after, on, off):
        if before != after:
            kind = on if after else off
            if kind is not None:
                events.append(TransitionEvent(kind, t, new))

    edge(s.stopper_engaged, stopper, EventKind.STOPPER_ENGAGED, EventKind.STOPPER_RELEASED)
    edge(s.tip_friction_lock, lock, EventKind.TIP_FRICTION_LOCK, EventKind.TIP_FRICTION_RELEASE)
    edge(s.contact, contact, EventKind.TIP_CONTACT, None)
    edge(s.mode == Mode.PULL_IN, m == Mode.PULL_IN,
         EventKind.CLUTCH_SLIP_START, EventKind.CLUTCH_SLIP_STOP)
    return new, events


def release_sequence(s: GripperState, p: MechParams) -> list[Mode]:
    """Modes traversed when the motor is reversed from ``s`` until fully open."""
    state, _ = step_transition(s, s.mode, direction=Direction.REVERSE, p=p)
    seq: list[Mode] = []
    for _ in range(8):
        tau = chain_torque_capacity(state, Direction.REVERSE, p)
        m = classify_motion(state, tau, Direction.REVERSE, p)
        if not seq or seq[-1] != m:
            seq.append(m)
        if m == Mode.GRASPING:
            if state.f_tip > 0:
                state = replace(state, f_tip=0.0, contact=False, mode=m)
                state, _ = step_transition(state, m, p=p)
                continue
            break
        if m == Mode.FINGER_BENDING:
            state = replace(state, theta_f=0.0, theta_sp2=state.theta_sp2 - state.theta_f, mode=m)
            state, _ = step_transition(state, m, p=p)
            continue
        break
    return seq

"""Torque/angle phase detection and setpoint tracking from motor readings only.

The controller sees nothing but motor angle and motor torque.  It drives the
motor at constant speed and infers the active mode: the bend-to-grasp switch
is the stopper angle, the grasp-to-pull-in switch is the torque peak, caught
by a threshold a little below the predicted peak.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, replace
from enum import Enum

from .errors import InvalidParams, PhaseRegression, ThresholdExceeded
from .params import HALF_PI, MechParams, Mode, preload_static_max
from .simulator import Command, Scenario, Trace, run
from .statics import alpha_kn

THRESHOLD_FACTOR = 0.95
STREAM_VERSION = 1
# angle slack when judging a phase regression from noisy encoder readings
REGRESSION_TOL = 1e-6


class Phase(str, Enum):
    BENDING = "Bending"
    GRASPING = "Grasping"
    PULL_IN = "PullIn"
    DONE = "Done"

    def __str__(self):
        return self.value


PHASE_MODES = {Phase.BENDING: Mode.FINGER_BENDING, Phase.GRASPING: Mode.GRASPING,
               Phase.PULL_IN: Mode.PULL_IN}


@dataclass(frozen=True)
class ControlGoal:
    theta_f_target: float = HALF_PI
    f_tip_target: float = 0.0
    d_pi_target: float = 0.0
    tau_m_threshold: float | None = None

    def threshold(self, p: MechParams) -> float:
        if self.tau_m_threshold is None:
            return default_threshold(p)
        return self.tau_m_threshold

    def check(self, p: MechParams) -> "ControlGoal":
        """Validate against ``p``; raises before any motion is commanded."""
        if not 0.0 <= self.theta_f_target <= p.theta_f_stop:
            raise InvalidParams("theta_f_target must lie in [0, stopper angle]")
        if self.f_tip_target < 0 or self.d_pi_target < 0:
            raise InvalidParams("force and pull-in targets must be >= 0")
        wants_grasp = self.f_tip_target > 0 or self.d_pi_target > 0
        if wants_grasp and self.theta_f_target < p.theta_f_stop:
            raise InvalidParams("grasping and pull-in need the finger fully bent first")
        target_motor_torque(self.f_tip_target, p, threshold=self.threshold(p))
        return self


def target_motor_torque(f_tip_target: float, p: MechParams, threshold: float | None = None) -> float:
    """Motor torque that holds ``f_tip_target`` when residual friction is negligible."""
    if f_tip_target < 0:
        raise InvalidParams("f_tip_target must be >= 0")
    tau = 2.0 * p.r_dr * alpha_kn(p) * f_tip_target
    if threshold is not None and tau >= threshold:
        raise ThresholdExceeded(
            f"target motor torque {tau:.4g} N m is not below the pull-in threshold {threshold:.4g} N m"
        )
    return tau


def pull_in_target_angle(d_pi_target: float, p: MechParams) -> float:
    if d_pi_target < 0:
        raise InvalidParams("d_pi_target must be >= 0")
    return d_pi_target / (p.epsilon * p.r_roller)


def default_threshold(p: MechParams, factor: float = THRESHOLD_FACTOR) -> float:
    """Pull-in detection threshold: a fraction of the motor-torque peak at clutch slip."""
    return factor * 2.0 * (preload_static_max(p) + p.tau_g1)


@dataclass(frozen=True)
class ControlState:
    phase: Phase = Phase.BENDING
    theta_m_gp: float | None = None
    grasp_tick: int | None = None
    phases: tuple[Phase, ...] = (Phase.BENDING,)

    def enter(self, phase: Phase, **changes) -> "ControlState":
        return replace(self, phase=phase, phases=self.phases + (phase,), **changes)


def control_step(obs, state: ControlState, goal: ControlGoal, p: MechParams,
                 speed: float = math.radians(14.0)):
    """One controller tick.

    ``obs`` is ``(tick, theta_m, tau_m)``.  Returns ``(Command, ControlState)``.
    """
    tick, theta_m, tau_m = obs
    switch = p.theta_f_stop
    threshold = goal.threshold(p)
    go = Command(velocity=speed)
    halt = Command(velocity=0.0, stop=True)

    if state.phase == Phase.DONE:
        return halt, state

    if state.phase == Phase.BENDING:
        if goal.theta_f_target < switch and theta_m >= goal.theta_f_target:
            return halt, replace(state, phase=Phase.DONE)
        if theta_m < switch:
            return go, state
        state = state.enter(Phase.GRASPING)

    if state.phase == Phase.GRASPING:
        if theta_m < switch - REGRESSION_TOL:
            raise PhaseRegression(f"motor angle {theta_m:.6g} rad is back below the bend switch")
        if tau_m >= threshold and goal.d_pi_target > 0:
            state = state.enter(Phase.PULL_IN, theta_m_gp=theta_m)
        else:
            tau_target = target_motor_torque(goal.f_tip_target, p)
            if tau_m >= tau_target and state.grasp_tick is None:
                state = replace(state, grasp_tick=tick)
            if state.grasp_tick is not None and goal.d_pi_target <= 0:
                return halt, replace(state, phase=Phase.DONE)
            return go, state

    if state.phase == Phase.PULL_IN:
        if theta_m < state.theta_m_gp - REGRESSION_TOL:
            raise PhaseRegression("motor angle is back below the pull-in switch point")
        if theta_m - state.theta_m_gp >= pull_in_target_angle(goal.d_pi_target, p):
            return halt, replace(state, phase=Phase.DONE)
        return go, state

    return halt, state


class Controller:
    """Stateful wrapper around :func:`control_step` for the simulator loop."""

    def __init__(self, goal: ControlGoal, p: MechParams, speed: float = math.radians(14.0)):
        self.goal = goal.check(p)
        self.p = p
        self.speed = speed
        self.state = ControlState()

    def command(self, tick: int, theta_m: float, tau_m: float) -> Command:
        cmd, self.state = control_step((tick, theta_m, tau_m), self.state, self.goal, self.p,
                                       self.speed)
        return cmd

    @property
    def phase_sequence(self) -> list[Phase]:
        return list(self.state.phases)

    @property
    def mode_sequence(self) -> list[Mode]:
        return [PHASE_MODES[ph] for ph in self.state.phases]


def _rel_err(achieved: float, target: float) -> float:
    if target == 0:
        return abs(achieved)
    return abs(achieved - target) / abs(target)


@dataclass
class ControlSummary:
    goal: ControlGoal
    tau_m_target: float
    tau_m_threshold: float
    theta_f: float
    f_tip: float
    d_pi: float
    phases: list[Phase] = field(default_factory=list)
    sim_modes: list[Mode] = field(default_factory=list)

    @property
    def errors(self) -> dict[str, float]:
        return {
            "theta_f": _rel_err(self.theta_f, self.goal.theta_f_target),
            "f_tip": _rel_err(self.f_tip, self.goal.f_tip_target),
            "d_pi": _rel_err(self.d_pi, self.goal.d_pi_target),
        }

    @property
    def sequences_match(self) -> bool:
        return [PHASE_MODES[ph] for ph in self.phases] == self.sim_modes

    def as_record(self) -> dict:
        g = self.goal
        return {
            "targets": {"theta_f": g.theta_f_target, "f_tip": g.f_tip_target,
                        "d_pi": g.d_pi_target},
            "achieved": {"theta_f": self.theta_f, "f_tip": self.f_tip, "d_pi": self.d_pi},
            "relative_error": self.errors,
            "tau_m_target": self.tau_m_target,
            "tau_m_threshold": self.tau_m_threshold,
            "phases": [ph.value for ph in self.phases],
            "sim_modes": [m.value for m in self.sim_modes],
            "sequences_match": self.sequences_match,
        }


def goal_from_scenario(scn: Scenario) -> ControlGoal:
    return ControlGoal(
        theta_f_target=HALF_PI if scn.goal_theta_f is None else scn.goal_theta_f,
        f_tip_target=scn.goal_f_tip or 0.0,
        d_pi_target=scn.goal_d_pi or 0.0,
        tau_m_threshold=scn.goal_tau_threshold,
    )


def run_closed_loop(scn: Scenario, goal: ControlGoal | None = None) -> tuple[Trace, ControlSummary]:
    """Drive the simulator with the controller until it stops.

    The achieved tip force is read when the grasp target torque is first
    reached; a later pull-in keeps squeezing harder, but that force belongs
    to the pull-in phase, not to the grasp setpoint.
    """
    goal = goal or goal_from_scenario(scn)
    ctrl = Controller(goal, scn.params, speed=abs(scn.motor_speed))
    trace = run(scn, controller=ctrl)
    st = ctrl.state
    final = trace.final.state
    f_row = trace.rows[st.grasp_tick] if st.grasp_tick is not None else trace.final
    summary = ControlSummary(
        goal=goal,
        tau_m_target=target_motor_torque(goal.f_tip_target, scn.params),
        tau_m_threshold=goal.threshold(scn.params),
        theta_f=final.theta_f,
        f_tip=f_row.state.f_tip,
        d_pi=final.d_pi,
        phases=[ph for ph in st.phases if ph != Phase.DONE],
        sim_modes=trace.mode_sequence(),
    )
    return trace, summary


def serve_stream(lines, goal: ControlGoal, p: MechParams, speed: float = math.radians(14.0)):
    """Line-delimited JSON bridge: observation records in, command records out.

    Input records: ``{"v": 1, "tick": int, "theta_m": float, "tau_m": float}``.
    Output records: ``{"v": 1, "tick": int, "velocity": float, "stop": bool}``.
    """
    ctrl = Controller(goal, p, speed)
    for line in lines:
        if not line.strip():
            continue
        rec = json.loads(line)
        if rec.get("v") != STREAM_VERSION:
            raise ValueError(f"unsupported stream version {rec.get('v')!r}")
        cmd = ctrl.command(int(rec["tick"]), float(rec["theta_m"]), float(rec["tau_m"]))
        yield json.dumps({"v": STREAM_VERSION, "tick": rec["tick"],
                          "velocity": cmd.velocity, "stop": cmd.stop})
        if cmd.stop:
            return

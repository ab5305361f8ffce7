"""Quasi-static time stepping of one finger under a motor command profile.

Within a step the mechanism moves in a single mode and every kinematic
channel is linear in motor angle, so the only discretization error comes from
where mode edges fall.  Those edges (stopper contact, tip contact, clutch
slip, torque cap) are located by bisection inside the step, which makes the
sampled trace independent of ``dt`` up to the bisection tolerance.
"""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass, field, fields, replace
from pathlib import Path

import numpy as np

from .contact import ObjectModel, pull_in_displacement, tip_force
from .errors import InfeasibleScenario, InvalidParams, NonConvergence, StuckState
from .modes import (
    TransitionEvent,
    chain_torque_capacity,
    classify_motion,
    fingertip_obstructed,
    step_transition,
)
from .params import Direction, GripperState, MechParams, Mode, validate_params
from .statics import (
    clutch_ceiling,
    grasp_chain_torque,
    motor_torque_from_chain,
    screw_advance_per_radian,
    slipping_clutch_torque,
    translation_breakaway_torque,
)

COLUMNS = ("t", "tau_m", "tau_rc2", "theta_m", "theta_f", "theta_sp2", "d_f", "f_tip",
           "d_pi", "theta_m_pi", "mode")

EVENT_TIME_TOL = 1e-9
BENCHES = ("", "smsA", "smsB")


@dataclass(frozen=True)
class Scenario:
    """Everything a run depends on, seed included.

    ``bench`` selects a test rig instead of the full finger: ``"smsA"`` locks
    the clutch (no pull-in), ``"smsB"`` drives sprocket 1 directly with the
    finger body fixed (no grasping).  ``profile`` is a sequence of
    ``(speed, duration)`` segments; when empty a single segment at
    ``motor_speed`` for ``duration`` is used.  A segment ends early when the
    torque cap is reached or the fingers are fully open.
    """

    params: MechParams = field(default_factory=MechParams)
    object: ObjectModel | None = field(default_factory=ObjectModel)
    motor_speed: float = math.radians(14.0)
    torque_cap: float = 0.8
    duration: float = 30.0
    motor_angle: float | None = None
    dt: float = 0.01
    noise_delta_f: tuple[float, float] | None = None
    noise_delta_tau: tuple[float, float] | None = None
    seed: int = 0
    initial_theta_f: float = 0.0
    bench: str = ""
    profile: tuple[tuple[float, float], ...] = ()
    goal_theta_f: float | None = None
    goal_f_tip: float | None = None
    goal_d_pi: float | None = None
    goal_tau_threshold: float | None = None
    name: str = ""

    def validate(self) -> "Scenario":
        validate_params(self.params)
        if not self.dt > 0:
            raise InvalidParams(f"dt must be > 0, got {self.dt!r}")
        if self.motor_speed == 0:
            raise InvalidParams("motor_speed must be nonzero")
        if not self.torque_cap > 0:
            raise InvalidParams("torque_cap must be > 0")
        if not self.duration > 0:
            raise InvalidParams("duration must be > 0")
        if self.motor_angle is not None and not self.motor_angle > 0:
            raise InvalidParams("motor_angle must be > 0")
        if self.bench not in BENCHES:
            raise InvalidParams(f"unknown bench {self.bench!r}")
        if not 0.0 <= self.initial_theta_f <= self.params.theta_f_stop:
            raise InvalidParams("initial_theta_f outside the stopper range")
        for rng in (self.noise_delta_f, self.noise_delta_tau):
            if rng is not None and not 0 <= rng[0] <= rng[1]:
                raise InvalidParams(f"noise range must satisfy 0 <= lo <= hi, got {rng!r}")
        for speed, dur in self.profile:
            if not dur > 0:
                raise InvalidParams("profile durations must be > 0")
        return self

    @property
    def noisy(self) -> bool:
        return self.noise_delta_f is not None or self.noise_delta_tau is not None

    def deterministic(self) -> "Scenario":
        return replace(self, noise_delta_f=None, noise_delta_tau=None)

    def segments(self):
        return self.profile or ((self.motor_speed, self.duration),)

    def as_record(self) -> dict:
        out = {}
        for f in fields(self):
            v = getattr(self, f.name)
            if f.name == "params":
                v = {g.name: getattr(v, g.name) for g in fields(v)}
            elif f.name == "object":
                v = None if v is None else {g.name: getattr(v, g.name) for g in fields(v)}
            elif f.name == "profile":
                v = [list(seg) for seg in v]
            elif isinstance(v, tuple):
                v = list(v)
            out[f.name] = v
        return out


@dataclass(frozen=True)
class TraceRow:
    t: float
    tau_m: float
    tau_rc2: float
    state: GripperState

    def values(self) -> tuple:
        s = self.state
        return (self.t, self.tau_m, self.tau_rc2, s.theta_m, s.theta_f, s.theta_sp2, s.d_f,
                s.f_tip, s.d_pi, s.theta_m_pi, s.mode.value)


@dataclass
class Trace:
    scenario: Scenario
    rows: list[TraceRow] = field(default_factory=list)
    events: list[TransitionEvent] = field(default_factory=list)
    chatter: bool = False
    chatter_flips: int = 0
    reentry: bool = False
    stop_reason: str = ""

    def __len__(self):
        return len(self.rows)

    def column(self, name: str) -> np.ndarray:
        idx = COLUMNS.index(name)
        if name == "mode":
            return np.array([r.values()[idx] for r in self.rows], dtype=object)
        return np.array([r.values()[idx] for r in self.rows], dtype=float)

    @property
    def modes(self) -> list[Mode]:
        return [r.state.mode for r in self.rows]

    def mode_sequence(self) -> list[Mode]:
        """Modes in order of appearance with consecutive repeats collapsed."""
        seq = []
        for m in self.modes:
            if not seq or seq[-1] != m:
                seq.append(m)
        return seq

    @property
    def final(self) -> TraceRow:
        return self.rows[-1]

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(COLUMNS)
        for r in self.rows:
            w.writerow([repr(v) if isinstance(v, float) else v for v in r.values()])
        return buf.getvalue()

    def events_jsonl(self) -> str:
        return "".join(json.dumps(e.as_record()) + "\n" for e in self.events)

    def metadata(self) -> dict:
        from . import __version__

        return {
            "library_version": __version__,
            "seed": self.scenario.seed,
            "rows": len(self.rows),
            "stop_reason": self.stop_reason,
            "chatter": self.chatter,
            "chatter_flips": self.chatter_flips,
            "reentry": self.reentry,
            "mode_sequence": [m.value for m in self.mode_sequence()],
            "scenario": self.scenario.as_record(),
        }


def write_trace(trace: Trace, out_dir, stem: str = "trace") -> dict[str, Path]:
    """Write CSV, event log and JSON metadata; returns the paths written."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    paths = {
        "trace": out_dir / f"{stem}.csv",
        "events": out_dir / f"{stem}.events.jsonl",
        "metadata": out_dir / f"{stem}.meta.json",
    }
    paths["trace"].write_text(trace.to_csv(), encoding="utf-8")
    paths["events"].write_text(trace.events_jsonl(), encoding="utf-8")
    paths["metadata"].write_text(json.dumps(trace.metadata(), indent=2) + "\n", encoding="utf-8")
    return paths


@dataclass(frozen=True)
class Command:
    velocity: float
    stop: bool = False


def _bisect(happened, hi: float, xtol: float) -> float:
    """Smallest advance (to ``xtol``) at which ``happened`` turns true."""
    lo = 0.0
    for _ in range(200):
        if hi - lo <= xtol:
            return hi
        mid = 0.5 * (lo + hi)
        if happened(mid):
            hi = mid
        else:
            lo = mid
    raise NonConvergence("event bisection did not converge")


class _Engine:
    """Per-run stepping machinery; holds the scenario constants."""

    def __init__(self, scn: Scenario):
        self.scn = scn
        self.base = scn.params
        self.p = scn.params
        self.obj = scn.object
        self.bench = scn.bench
        self.clutch_locked = scn.bench == "smsA"
        self.rng = np.random.default_rng(scn.seed)

    # -- physics of one mode ------------------------------------------------

    def capacity(self, s: GripperState, d: Direction) -> float:
        return chain_torque_capacity(s, d, self.p, self.clutch_locked)

    def classify(self, s: GripperState, d: Direction) -> Mode:
        if self.bench == "smsB":
            # sprocket 1 is motor-driven, so it always turns; the clutch decides the rest
            if not fingertip_obstructed(s, d, self.p) and self.p.tau_joint <= clutch_ceiling(self.p):
                return Mode.FINGER_BENDING
            return Mode.PULL_IN
        return classify_motion(s, self.capacity(s, d), d, self.p, clutch_locked=self.clutch_locked)

    def chain_torque(self, s: GripperState, m: Mode, d: Direction) -> float:
        p = self.p
        if m == Mode.FINGER_BENDING:
            tau = p.tau_joint
        elif m == Mode.PULL_IN:
            tau = slipping_clutch_torque(s.slip_angle, p)
        else:
            f = s.f_tip if d == Direction.FORWARD else 0.0
            tau = min(max(grasp_chain_torque(f, p), 0.0), self.capacity(s, d))
        return float(d) * tau

    def advance(self, s: GripperState, m: Mode, dth: float) -> GripperState:
        p = self.p
        theta_m = s.theta_m + dth
        if m == Mode.FINGER_BENDING:
            theta_f = min(max(s.theta_f + dth, 0.0), p.theta_f_stop)
            return replace(s, theta_m=theta_m, theta_f=theta_f, theta_sp2=s.theta_sp2 + dth)
        if m == Mode.GRASPING:
            d_f = max(s.d_f + screw_advance_per_radian(p) * dth, 0.0)
            return replace(s, theta_m=theta_m, d_f=d_f, f_tip=tip_force(d_f, self.obj))
        theta_m_pi = s.theta_m_pi + dth
        return replace(s, theta_m=theta_m, theta_sp2=s.theta_sp2 + dth, theta_m_pi=theta_m_pi,
                       d_pi=pull_in_displacement(theta_m_pi, p),
                       slip_angle=s.slip_angle + abs(dth))

    def in_contact(self, s: GripperState) -> bool:
        return self.obj is not None and s.d_f > self.obj.gap0

    def edge_predicates(self, s: GripperState, m: Mode, d: Direction):
        """``(name, predicate)`` pairs that flip from false to true at a mode edge."""
        p = self.p
        preds = []
        if m == Mode.FINGER_BENDING:
            if d == Direction.FORWARD:
                preds.append(("stopper", lambda q: q.theta_f >= p.theta_f_stop))
            else:
                preds.append(("stopper", lambda q: q.theta_f <= 0.0))
        elif m == Mode.GRASPING:
            if self.obj is not None:
                if d == Direction.FORWARD:
                    preds.append(("contact", self.in_contact))
                else:
                    preds.append(("contact", lambda q: not self.in_contact(q)))
            if d == Direction.FORWARD:
                cap = self.capacity(s, d)
                if math.isfinite(cap):
                    preds.append(("switch", lambda q: translation_breakaway_torque(q.f_tip, p) > cap))
                half_cap = self.scn.torque_cap / 2.0
                preds.append(("cap", lambda q: abs(self.chain_torque(q, m, d)) >= half_cap))
            else:
                preds.append(("open", lambda q: q.d_f <= 0.0))
        return preds

    # -- one step -----------------------------------------------------------

    def step(self, s: GripperState, d: Direction, travel: float, omega: float, t0: float):
        """Advance the motor by ``travel`` (>= 0) radians in direction ``d``.

        Returns ``(state, events, halt_reason, motions)`` where ``motions``
        lists ``(mode, obstructed)`` for each piece of the step.
        """
        events: list[TransitionEvent] = []
        motions = []
        halt = None
        done = 0.0
        xtol = max(abs(omega) * EVENT_TIME_TOL, 1e-15)
        t_now = t0
        for _ in range(64):
            # flags first: a lock released at an edge must be seen by the classifier
            s, ev = step_transition(s, s.mode, t=t_now, contact=self.in_contact(s), p=self.p)
            events.extend(ev)
            try:
                m = self.classify(s, d)
            except StuckState as exc:
                raise InfeasibleScenario(str(exc), condition=exc.condition, time=t_now) from None
            motions.append((m, fingertip_obstructed(s, d, self.p)))
            s, ev = step_transition(s, m, t=t_now, contact=self.in_contact(s), p=self.p)
            events.extend(ev)
            remaining = travel - done
            if remaining <= 0 or halt is not None:
                return s, events, halt, motions
            end = self.advance(s, m, float(d) * remaining)
            best = None
            for name, pred in self.edge_predicates(s, m, d):
                if pred(s) or not pred(end):
                    continue
                x = _bisect(lambda x: pred(self.advance(s, m, float(d) * x)), remaining, xtol)
                if best is None or x < best[0]:
                    best = (x, name)
            if best is None:
                s = end
                done = travel
                continue
            x, name = best
            s = self.advance(s, m, float(d) * x)
            done += x
            t_now = t0 + done / abs(omega) if omega else t0
            if name == "stopper":
                s = replace(s, theta_f=self.p.theta_f_stop if d == Direction.FORWARD else 0.0)
            elif name == "cap":
                halt = "torque_cap"
            elif name == "open":
                halt = "fully_open"
        raise NonConvergence(f"more than 64 mode edges inside one step at t={t0}")

    def sample_params(self):
        scn = self.scn
        changes = {}
        if scn.noise_delta_f is not None:
            changes["delta_f"] = float(self.rng.uniform(*scn.noise_delta_f))
        if scn.noise_delta_tau is not None:
            changes["delta_tau"] = float(self.rng.uniform(*scn.noise_delta_tau))
        self.p = replace(self.base, **changes) if changes else self.base


class _Recorder:
    def __init__(self, engine: _Engine, trace: Trace):
        self.engine = engine
        self.trace = trace
        self.last_motion = None

    def row(self, t: float, s: GripperState) -> TraceRow:
        tau_rc2 = self.engine.chain_torque(s, s.mode, s.direction)
        row = TraceRow(t=t, tau_m=motor_torque_from_chain(tau_rc2), tau_rc2=tau_rc2, state=s)
        self.trace.rows.append(row)
        return row

    def motions(self, motions, direction):
        rot_trans = {Mode.FINGER_BENDING, Mode.GRASPING}
        for m, obstructed in motions:
            key = (m, obstructed, direction)
            if self.last_motion is not None and key != self.last_motion:
                pm, pob, pdir = self.last_motion
                if pdir == direction and {pm, m} == rot_trans and pob == obstructed:
                    self.trace.chatter_flips += 1
                    self.trace.chatter = True
            self.last_motion = key


def _initial_state(scn: Scenario, direction: Direction) -> GripperState:
    s = GripperState(theta_f=scn.initial_theta_f, theta_sp2=scn.initial_theta_f,
                     direction=direction)
    s, _ = step_transition(s, s.mode, p=scn.params)
    return s


def _check_reentry(trace: Trace):
    seen = set()
    prev = None
    for r in trace.rows:
        key = (r.state.mode, r.state.direction)
        if key != prev:
            if key in seen and key[0] == Mode.GRASPING and prev and prev[0] == Mode.PULL_IN:
                trace.reentry = True
            seen.add(key)
            prev = key


def run(scn: Scenario, controller=None) -> Trace:
    """Simulate ``scn``; with ``controller`` the motor speed comes from its commands.

    ``controller`` must provide ``command(tick, theta_m, tau_m) -> Command``.
    """
    scn.validate()
    engine = _Engine(scn)
    trace = Trace(scenario=scn)
    rec = _Recorder(engine, trace)

    segments = scn.segments()
    d0 = Direction.FORWARD if segments[0][0] >= 0 else Direction.REVERSE
    s = _initial_state(scn, d0)
    try:
        m0 = engine.classify(s, d0)
    except StuckState as exc:
        raise InfeasibleScenario(str(exc), condition=exc.condition, time=0.0) from None
    s, ev0 = step_transition(s, m0, contact=engine.in_contact(s), p=scn.params)
    trace.events.extend(ev0)
    rec.motions([(m0, fingertip_obstructed(s, d0, scn.params))], d0)
    last = rec.row(0.0, s)

    tick = 0
    travelled = 0.0
    stop_reason = "duration"
    if controller is not None:
        segments = ((scn.motor_speed, scn.duration),)
    for speed, seg_duration in segments:
        n_steps = int(round(seg_duration / scn.dt))
        halted = False
        for _ in range(n_steps):
            omega = speed
            if controller is not None:
                cmd = controller.command(tick, last.state.theta_m, last.tau_m)
                if cmd.stop:
                    stop_reason = "controller_stop"
                    halted = True
                    break
                omega = cmd.velocity
            t0 = tick * scn.dt
            tick += 1
            engine.sample_params()
            events = []
            halt = None
            if omega != 0:
                d = Direction.FORWARD if omega > 0 else Direction.REVERSE
                if d != s.direction:
                    s, ev = step_transition(s, s.mode, t=t0, direction=d,
                                            contact=engine.in_contact(s), p=engine.p)
                    events.extend(ev)
                travel = abs(omega) * scn.dt
                if scn.motor_angle is not None:
                    travel = max(min(travel, scn.motor_angle - travelled), 0.0)
                s, ev, halt, motions = engine.step(s, d, travel, omega, t0)
                events.extend(ev)
                travelled += travel
                rec.motions(motions, d)
                if scn.motor_angle is not None and travelled >= scn.motor_angle - 1e-12:
                    halt = halt or "motor_angle"
            trace.events.extend(events)
            last = rec.row(tick * scn.dt, s)
            if halt is not None:
                stop_reason = halt
                halted = True
                break
        if halted and stop_reason in ("controller_stop", "motor_angle"):
            break
    trace.stop_reason = stop_reason
    _check_reentry(trace)
    return trace


def run_smsB_bench(scn: Scenario) -> Trace:
    """Fingertip/clutch rig: finger body fixed, sprocket 1 driven by the motor."""
    return run(replace(scn, bench="smsB", object=None))


def run_smsA_bench(scn: Scenario) -> Trace:
    """Screw rig: fingertip unit locked to sprocket 2, so pull-in never starts."""
    return run(replace(scn, bench="smsA"))

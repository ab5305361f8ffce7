"""Design constants, gripper state, and flat key-value parameter files.

All angles are radians internally.  Parameter files may give any angle key
with a ``_deg`` suffix instead (``lambda_deg = 30``); conversion happens
only at the file boundary.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, fields, replace
from enum import Enum, IntEnum
from pathlib import Path

from .errors import (
    ConfigParseError,
    FrictionOrdering,
    InvalidParams,
    NonPositiveDimension,
    SingularLeadAngle,
)

HALF_PI = math.pi / 2


class Mode(str, Enum):
    FINGER_BENDING = "FingerBending"
    GRASPING = "Grasping"
    PULL_IN = "PullIn"
    CHATTER = "Chatter"

    def __str__(self):
        return self.value


class Direction(IntEnum):
    FORWARD = 1
    REVERSE = -1


@dataclass(frozen=True)
class MechParams:
    """Design constants of one finger's two switching mechanisms.

    ``lam`` is the thread lead angle (file key ``lambda``).  ``tau_joint``
    is the torque needed to swing the free fingertip unit and ``phi_slip``
    the relative slip angle over which the clutch torque falls from its
    static peak to the kinetic level; both default to values that leave
    the idealized statics unchanged except where a scenario asks for them.
    """

    lam: float = math.radians(30.0)
    r_dr: float = 0.005
    mu_st: float = 0.3
    mu_kn: float = 0.3
    delta_f: float = 0.5
    delta_tau: float = 0.001
    t_scw: float = 0.46
    c_pre: float = 0.4
    tau_pre_kn: float = 0.15
    tau_g1: float = 0.0001
    epsilon: float = 1.0
    r_roller: float = 0.005
    theta_f_stop: float = HALF_PI
    tau_joint: float = 0.0002
    phi_slip: float = math.radians(10.0)

    def replace(self, **changes) -> "MechParams":
        return replace(self, **changes)


def lead_angle_limit(mu: float) -> float:
    """Largest admissible lead angle for friction coefficient ``mu``."""
    if mu <= 0:
        return HALF_PI
    return math.atan(1.0 / mu)


def validate_params(p: MechParams) -> MechParams:
    """Return ``p`` unchanged if every invariant holds, otherwise raise."""
    for f in fields(p):
        v = getattr(p, f.name)
        if not isinstance(v, (int, float)) or not math.isfinite(v):
            raise InvalidParams(f"{f.name} must be a finite number, got {v!r}")
    if p.lam <= 0:
        raise SingularLeadAngle(f"lead angle must be positive, got {p.lam!r}")
    for name in ("r_dr", "r_roller", "epsilon", "theta_f_stop"):
        if getattr(p, name) <= 0:
            raise NonPositiveDimension(f"{name} must be > 0, got {getattr(p, name)!r}")
    if p.mu_kn < 0 or p.mu_st < 0:
        raise InvalidParams("friction coefficients must be non-negative")
    if p.mu_kn > p.mu_st:
        raise FrictionOrdering(f"mu_kn={p.mu_kn} exceeds mu_st={p.mu_st}")
    for mu, label in ((p.mu_st, "mu_st"), (p.mu_kn, "mu_kn")):
        limit = lead_angle_limit(mu)
        if p.lam >= limit:
            raise SingularLeadAngle(
                f"lead angle {math.degrees(p.lam):.3f} deg reaches the self-locking pole "
                f"arctan(1/{label}) = {math.degrees(limit):.3f} deg"
            )
    for name in ("delta_f", "delta_tau", "tau_g1", "t_scw", "c_pre", "tau_pre_kn",
                 "tau_joint", "phi_slip"):
        if getattr(p, name) < 0:
            raise InvalidParams(f"{name} must be >= 0, got {getattr(p, name)!r}")
    if p.tau_pre_kn > preload_static_max(p):
        raise FrictionOrdering(
            f"kinetic clutch torque {p.tau_pre_kn} exceeds static maximum {preload_static_max(p)}"
        )
    return p


def preload_static_max(p: MechParams) -> float:
    """Maximum static clutch friction torque produced by the tightening torque."""
    return p.c_pre * p.t_scw


def with_tightening(p: MechParams, t_scw: float) -> MechParams:
    """Copy of ``p`` with a new tightening torque.

    The kinetic clutch torque keeps its ratio to the static maximum so the
    result stays valid for any ``t_scw >= 0``.
    """
    st = preload_static_max(p)
    ratio = p.tau_pre_kn / st if st > 0 else 1.0
    return replace(p, t_scw=t_scw, tau_pre_kn=ratio * p.c_pre * t_scw)


@dataclass(frozen=True)
class GripperState:
    """Quasi-static state of one finger (the other mirrors it)."""

    mode: Mode = Mode.FINGER_BENDING
    theta_m: float = 0.0
    theta_f: float = 0.0
    theta_sp2: float = 0.0
    d_f: float = 0.0
    f_tip: float = 0.0
    d_pi: float = 0.0
    theta_m_pi: float = 0.0
    stopper_engaged: bool = False
    tip_friction_lock: bool = False
    direction: Direction = Direction.FORWARD
    contact: bool = False
    slip_angle: float = 0.0

    @property
    def clutch_slip(self) -> float:
        """Relative rotation between sprocket 2 and the fingertip unit."""
        return self.theta_sp2 - self.theta_f

    def as_record(self) -> dict:
        out = {}
        for f in fields(self):
            v = getattr(self, f.name)
            if isinstance(v, Mode):
                v = v.value
            elif isinstance(v, Direction):
                v = int(v)
            out[f.name] = v
        return out


# -- flat key-value files ---------------------------------------------------

ANGLE_KEYS = {"lambda", "theta_f_stop", "phi_slip"}
_FILE_TO_ATTR = {"lambda": "lam"}
_ATTR_TO_FILE = {v: k for k, v in _FILE_TO_ATTR.items()}
PARAM_KEYS = tuple(_ATTR_TO_FILE.get(f.name, f.name) for f in fields(MechParams))


def parse_kv(text: str, path=None):
    """Split ``key = value`` lines; yields ``(key, value, line, column)``.

    Blank lines and ``#`` comments are skipped.  The column points at the
    value so downstream errors can locate it.
    """
    seen = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0]
        if not line.strip():
            continue
        if "=" not in line:
            col = len(line) - len(line.lstrip()) + 1
            raise ConfigParseError("expected 'key = value'", lineno, col, path)
        key_part, value_part = line.split("=", 1)
        key = key_part.strip()
        if not key or not key.replace("_", "").isalnum():
            col = len(key_part) - len(key_part.lstrip()) + 1
            raise ConfigParseError(f"invalid key {key!r}", lineno, col, path)
        value = value_part.strip()
        col = len(key_part) + 2 + (len(value_part) - len(value_part.lstrip()))
        if key in seen:
            raise ConfigParseError(f"duplicate key {key!r} (first on line {seen[key]})",
                                   lineno, 1, path)
        seen[key] = lineno
        yield key, value, lineno, col


def parse_float(value: str, line=0, column=0, path=None) -> float:
    try:
        x = float(value)
    except ValueError:
        raise ConfigParseError(f"expected a number, got {value!r}", line, column, path) from None
    if not math.isfinite(x):
        raise ConfigParseError(f"expected a finite number, got {value!r}", line, column, path)
    return x


def param_entry(key: str, value: str, line=0, column=0, path=None):
    """Map one file entry to ``(attribute, radians-or-SI value)`` or None."""
    base, deg = (key[:-4], True) if key.endswith("_deg") else (key, False)
    if base not in PARAM_KEYS:
        return None
    if deg and base not in ANGLE_KEYS:
        raise ConfigParseError(f"{base!r} is not an angle; '_deg' not allowed", line, 1, path)
    x = parse_float(value, line, column, path)
    if deg:
        x = math.radians(x)
    return _FILE_TO_ATTR.get(base, base), x


def parse_params(text: str, base: MechParams | None = None, path=None) -> MechParams:
    changes = {}
    for key, value, line, col in parse_kv(text, path):
        entry = param_entry(key, value, line, col, path)
        if entry is None:
            raise ConfigParseError(f"unknown parameter {key!r}", line, 1, path)
        attr, x = entry
        if attr in changes:
            raise ConfigParseError(f"{attr!r} given twice (degree and radian forms?)",
                                   line, 1, path)
        changes[attr] = x
    return validate_params(replace(base or MechParams(), **changes))


def load_params(path) -> MechParams:
    path = Path(path)
    return parse_params(path.read_text(encoding="utf-8"), path=str(path))


def dump_params(p: MechParams) -> str:
    """Serialize in radians with round-trip-exact float text."""
    lines = [f"{_ATTR_TO_FILE.get(f.name, f.name)} = {getattr(p, f.name)!r}" for f in fields(p)]
    return "\n".join(lines) + "\n"

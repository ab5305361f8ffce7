"""Scenario files: flat ``key = value`` text, plus the bundled presets.

Scenario files accept every parameter-file key (``lambda_deg = 30`` etc.)
together with run settings and object keys (``gap0``, ``k_obj``, ``fixed``).
``profile`` is a comma list of ``speed:duration`` pairs; ``profile_deg``
gives the speeds in deg/s.  ``object = false`` removes the object.
"""

from __future__ import annotations

import math
from dataclasses import fields, replace
from importlib import resources
from pathlib import Path

from .contact import ObjectModel
from .errors import ConfigParseError, GripperError
from .params import MechParams, param_entry, parse_float, parse_kv, validate_params
from .simulator import Scenario

_FLOAT_KEYS = {"torque_cap", "duration", "dt", "goal_f_tip", "goal_d_pi", "goal_tau_threshold"}
_ANGLE_KEYS = {"motor_speed", "motor_angle", "initial_theta_f", "goal_theta_f"}
_RANGE_KEYS = {"noise_delta_f", "noise_delta_tau"}
_OBJECT_KEYS = {"gap0", "k_obj"}
_STR_KEYS = {"name", "bench"}
_BOOL = {"true": True, "yes": True, "1": True, "false": False, "no": False, "0": False}


def _parse_bool(value, line, col, path):
    try:
        return _BOOL[value.lower()]
    except KeyError:
        raise ConfigParseError(f"expected true/false, got {value!r}", line, col, path) from None


def parse_scenario(text: str, path=None) -> Scenario:
    param_changes = {}
    obj_changes = {}
    has_object = True
    kw = {}
    for key, value, line, col in parse_kv(text, path):
        entry = param_entry(key, value, line, col, path)
        if entry is not None:
            param_changes[entry[0]] = entry[1]
            continue
        base, deg = (key[:-4], True) if key.endswith("_deg") else (key, False)
        if deg and base not in _ANGLE_KEYS and base != "profile":
            raise ConfigParseError(f"{base!r} does not take a '_deg' form", line, 1, path)
        if base in _STR_KEYS:
            kw[base] = value
        elif base == "seed":
            try:
                kw["seed"] = int(value)
            except ValueError:
                raise ConfigParseError(f"seed must be an integer, got {value!r}",
                                       line, col, path) from None
            if kw["seed"] < 0:
                raise ConfigParseError("seed must be non-negative", line, col, path)
        elif base in _FLOAT_KEYS:
            kw[base] = parse_float(value, line, col, path)
        elif base in _ANGLE_KEYS:
            x = parse_float(value, line, col, path)
            kw[base] = math.radians(x) if deg else x
        elif base in _RANGE_KEYS:
            parts = [v.strip() for v in value.split(",")]
            if len(parts) != 2:
                raise ConfigParseError("expected 'lo, hi'", line, col, path)
            kw[base] = tuple(parse_float(v, line, col, path) for v in parts)
        elif base == "profile":
            segs = []
            for item in value.split(","):
                if ":" not in item:
                    raise ConfigParseError(f"profile entry {item.strip()!r} is not 'speed:duration'",
                                           line, col, path)
                sp, du = item.split(":", 1)
                speed = parse_float(sp.strip(), line, col, path)
                segs.append((math.radians(speed) if deg else speed,
                             parse_float(du.strip(), line, col, path)))
            kw["profile"] = tuple(segs)
        elif base in _OBJECT_KEYS:
            obj_changes[base] = parse_float(value, line, col, path)
        elif base == "fixed":
            obj_changes["fixed"] = _parse_bool(value, line, col, path)
        elif base == "object":
            has_object = _parse_bool(value, line, col, path)
        else:
            raise ConfigParseError(f"unknown key {key!r}", line, 1, path)
    try:
        params = validate_params(replace(MechParams(), **param_changes))
        obj = replace(ObjectModel(), **obj_changes) if has_object else None
        return Scenario(params=params, object=obj, **kw).validate()
    except GripperError as exc:
        raise ConfigParseError(str(exc), 0, 0, path) from exc


def dump_scenario(scn: Scenario) -> str:
    """Canonical text (radians, round-trip-exact floats) for ``scn``."""
    lines = []
    for f in fields(MechParams):
        key = "lambda" if f.name == "lam" else f.name
        lines.append(f"{key} = {getattr(scn.params, f.name)!r}")
    if scn.object is None:
        lines.append("object = false")
    else:
        lines += [f"gap0 = {scn.object.gap0!r}", f"k_obj = {scn.object.k_obj!r}",
                  f"fixed = {str(scn.object.fixed).lower()}"]
    for f in fields(Scenario):
        if f.name in ("params", "object"):
            continue
        v = getattr(scn, f.name)
        if v is None or (f.name == "profile" and not v):
            continue
        if f.name in _RANGE_KEYS:
            v = f"{v[0]!r}, {v[1]!r}"
        elif f.name == "profile":
            v = ", ".join(f"{sp!r}:{du!r}" for sp, du in v)
        elif isinstance(v, float):
            v = repr(v)
        if f.name in _STR_KEYS and v == "":
            continue
        lines.append(f"{f.name} = {v}")
    return "\n".join(lines) + "\n"


def load_scenario(path) -> Scenario:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigParseError(f"cannot read scenario: {exc.strerror}", 0, 0, str(path)) from None
    return parse_scenario(text, path=str(path))


def preset_names() -> list[str]:
    root = resources.files(__package__) / "scenarios"
    return sorted(p.name[:-4] for p in root.iterdir() if p.name.endswith(".scn"))


def load_preset(name: str) -> Scenario:
    res = resources.files(__package__) / "scenarios" / f"{name}.scn"
    if not res.is_file():
        raise ConfigParseError(f"no bundled scenario named {name!r}", 0, 0, name)
    return parse_scenario(res.read_text(encoding="utf-8"), path=f"<preset {name}>")


def resolve_scenario(ref: str) -> Scenario:
    """A path if one exists, otherwise a bundled preset name."""
    path = Path(ref)
    if path.exists() or ref.endswith(".scn") or "/" in ref:
        return load_scenario(path)
    return load_preset(ref)

"""Linear-spring object contact and belt pull-in kinematics."""

from __future__ import annotations

from dataclasses import dataclass

from .errors import InvalidParams
from .params import MechParams


@dataclass(frozen=True)
class ObjectModel:
    """Object between the fingertips, seen by one finger.

    ``gap0`` is the finger travel before touch and ``k_obj`` the contact
    stiffness.  ``fixed`` is carried through scenario files for bookkeeping;
    the simulator always treats the object as held in place.
    """

    gap0: float = 0.010
    k_obj: float = 20_000.0
    fixed: bool = True

    def __post_init__(self):
        if not self.k_obj > 0:
            raise InvalidParams(f"k_obj must be > 0, got {self.k_obj!r}")
        if not self.gap0 >= 0:
            raise InvalidParams(f"gap0 must be >= 0, got {self.gap0!r}")


def tip_force(d_f: float, obj: ObjectModel | None) -> float:
    # an unanchored object is still squeezed between two symmetric fingers,
    # so the spring law applies either way
    if obj is None:
        return 0.0
    return obj.k_obj * max(0.0, d_f - obj.gap0)


def contact_travel(f_tip: float, obj: ObjectModel) -> float:
    """Finger translation at which the contact force equals ``f_tip``."""
    return obj.gap0 + f_tip / obj.k_obj


def pull_in_displacement(theta_m_pi: float, p: MechParams) -> float:
    """Belt travel for motor rotation ``theta_m_pi`` since pull-in began (no belt slip)."""
    return p.epsilon * p.r_roller * theta_m_pi

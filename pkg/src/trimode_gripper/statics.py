"""Quasi-static screw and clutch relations for one finger.

Every predicate uses strict inequalities on absolute values, so it is
direction-agnostic; the mode machine decides what the sign of motion means.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .errors import SingularLeadAngle
from .params import MechParams, preload_static_max


@dataclass(frozen=True)
class ScrewWrench:
    f_sm: float
    tau_sm: float


@dataclass(frozen=True)
class TorqueBalanceB:
    """Static torque balance of sprocket 2 against the fingertip unit."""

    tau_rc2: float
    tau_pre: float
    tau_g1: float
    tau_stopper: float

    @classmethod
    def at_rest(cls, tau_rc2: float, p: MechParams) -> "TorqueBalanceB":
        return cls(tau_rc2=tau_rc2, tau_pre=tau_rc2 - p.tau_g1, tau_g1=p.tau_g1,
                   tau_stopper=tau_rc2)


def amplification(lam: float, mu: float) -> float:
    """Equivalent screw torque per unit axial load per unit pitch radius.

    ``(mu cos lam + sin lam) / (cos lam - mu sin lam)``; diverges at
    ``lam = arctan(1/mu)``.
    """
    c, s = math.cos(lam), math.sin(lam)
    den = c - mu * s
    if den <= 0:
        raise SingularLeadAngle(
            f"lead angle {math.degrees(lam):.4f} deg is at or beyond arctan(1/{mu})"
        )
    return (mu * c + s) / den


def alpha_st(p: MechParams) -> float:
    return amplification(p.lam, p.mu_st)


def alpha_kn(p: MechParams) -> float:
    return amplification(p.lam, p.mu_kn)


def screw_wrench(f_n: float, f_fri: float, p: MechParams) -> ScrewWrench:
    c, s = math.cos(p.lam), math.sin(p.lam)
    return ScrewWrench(f_sm=f_n * c - f_fri * s, tau_sm=p.r_dr * (f_fri * c + f_n * s))


def chain_torque_from_motor(tau_m: float) -> float:
    """Per-finger chain torque; the motor torque splits evenly over two fingers."""
    return tau_m / 2.0


def motor_torque_from_chain(tau_rc2: float) -> float:
    return 2.0 * tau_rc2


def rotation_condition(f_tip: float, tau_rc2: float, p: MechParams) -> bool:
    """True when sprocket 1 turns with the drive shaft."""
    return abs(alpha_st(p) * p.r_dr * (f_tip + p.delta_f)) > abs(tau_rc2 + p.delta_tau)


def translation_condition(f_tip: float, tau_rc2: float, p: MechParams) -> bool:
    """True when sprocket 1 slides along the drive shaft (grasping motion)."""
    return abs((tau_rc2 + p.delta_tau) / (p.r_dr * alpha_st(p))) > abs(f_tip + p.delta_f)


def rotation_margin(f_tip: float, tau_rc2: float, p: MechParams) -> float:
    """Signed slack of the rotation inequality (positive: rotation holds)."""
    return abs(alpha_st(p) * p.r_dr * (f_tip + p.delta_f)) - abs(tau_rc2 + p.delta_tau)


def clutch_ceiling(p: MechParams) -> float:
    """Chain torque above which sprocket 2 slips on the fingertip unit."""
    return preload_static_max(p) + p.tau_g1


def clutch_slip_condition(tau_rc2: float, p: MechParams) -> bool:
    return tau_rc2 > clutch_ceiling(p)


def translation_breakaway_torque(f_tip: float, p: MechParams) -> float:
    """Chain torque at which translation starts against a tip load ``f_tip``."""
    return alpha_st(p) * p.r_dr * (f_tip + p.delta_f) - p.delta_tau


def grasp_chain_torque(f_tip: float, p: MechParams) -> float:
    """Chain torque sustaining a sliding grasp at tip force ``f_tip``."""
    return alpha_kn(p) * p.r_dr * (f_tip + p.delta_f) - p.delta_tau


def grasp_equilibrium_tip_force(tau_m: float, p: MechParams) -> float:
    """Tip force balanced by motor torque ``tau_m`` during grasping (>= 0)."""
    f = (tau_m / 2.0 + p.delta_tau) / (p.r_dr * alpha_kn(p)) - p.delta_f
    return max(f, 0.0)


def pull_in_chain_torque(p: MechParams) -> float:
    return p.tau_pre_kn + p.tau_g1


def slipping_clutch_torque(slip_angle: float, p: MechParams) -> float:
    """Chain torque while the clutch slips, ``slip_angle`` after onset.

    Starts at the static ceiling and falls linearly to the kinetic level over
    ``p.phi_slip`` of relative rotation.
    """
    peak = clutch_ceiling(p)
    settled = pull_in_chain_torque(p)
    if p.phi_slip <= 0 or slip_angle >= p.phi_slip:
        return settled
    w = max(slip_angle, 0.0) / p.phi_slip
    return peak + (settled - peak) * w


def reverse_bend_condition(f_tip: float, p: MechParams) -> bool:
    """Finger extension on reversal, when the stopper torque has vanished."""
    return abs(alpha_st(p) * p.r_dr * (f_tip + p.delta_f)) > abs(p.delta_tau)


def screw_advance_per_radian(p: MechParams) -> float:
    """Axial travel of sprocket 1 per radian of drive-shaft rotation."""
    return p.r_dr * math.tan(p.lam)

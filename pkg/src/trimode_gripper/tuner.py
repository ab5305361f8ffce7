"""Feasibility map and constrained grid search over lead angle and tightening torque."""

from __future__ import annotations

import csv
import io
import math
from dataclasses import asdict, dataclass, fields, replace

import numpy as np

from .errors import Infeasible
from .params import MechParams, validate_params, with_tightening
from .statics import (
    alpha_st,
    clutch_ceiling,
    clutch_slip_condition,
    grasp_equilibrium_tip_force,
    rotation_condition,
    screw_advance_per_radian,
    translation_condition,
)

DEFAULT_SAFETY = 2.0


@dataclass(frozen=True)
class FeasibilityRow:
    lam: float
    t_scw: float
    bend_first: bool
    grasp_second: bool
    pull_in_reachable: bool
    chatter_ratio: float
    chatter_margin: float
    f_tip_at_cap: float
    f_tip_max: float
    closing_speed: float

    @property
    def ordering_ok(self) -> bool:
        return self.bend_first and self.grasp_second and self.pull_in_reachable

    def chatter_safe(self, safety: float = DEFAULT_SAFETY) -> bool:
        return self.chatter_ratio >= safety

    def as_record(self) -> dict:
        rec = asdict(self)
        rec["lambda_deg"] = math.degrees(self.lam)
        rec["ordering_ok"] = self.ordering_ok
        return rec


def evaluate_point(lam: float, t_scw: float, base: MechParams, torque_cap: float = 0.8) -> FeasibilityRow:
    """Check the three ordering constraints at one design point.

    * bend first: at rest the free fingertip swings (rotation beats
      translation) without the clutch slipping;
    * grasp second: once the stopper holds, the chain torque starts
      translation before it can break the clutch loose;
    * pull-in reachable: the clutch slips below the motor torque cap.

    ``f_tip_max`` is the grasp force at the moment the clutch slips, the
    largest force the grasp can hold before pull-in takes over.
    """
    p = validate_params(replace(with_tightening(base, t_scw), lam=lam))
    tau0 = p.tau_joint
    bend_first = rotation_condition(0.0, tau0, p) and not clutch_slip_condition(tau0, p)
    ceiling = clutch_ceiling(p)
    grasp_second = translation_condition(0.0, ceiling, p)
    reachable = 2.0 * ceiling < torque_cap
    lhs = abs(alpha_st(p) * p.r_dr * p.delta_f)
    rhs = abs(p.delta_tau) + p.tau_joint
    ratio = lhs / rhs if rhs > 0 else math.inf
    return FeasibilityRow(
        lam=lam,
        t_scw=t_scw,
        bend_first=bend_first,
        grasp_second=grasp_second,
        pull_in_reachable=reachable,
        chatter_ratio=ratio,
        chatter_margin=ratio - 1.0,
        f_tip_at_cap=grasp_equilibrium_tip_force(torque_cap, p),
        f_tip_max=grasp_equilibrium_tip_force(2.0 * min(ceiling, torque_cap / 2.0), p),
        closing_speed=screw_advance_per_radian(p),
    )


def sweep(lams, t_scws, base: MechParams, torque_cap: float = 0.8) -> list[FeasibilityRow]:
    """Evaluate the full grid in lambda-major order."""
    return [evaluate_point(float(lam), float(t), base, torque_cap) for lam in lams for t in t_scws]


def report_csv(rows: list[FeasibilityRow], safety: float = DEFAULT_SAFETY) -> str:
    cols = [f.name for f in fields(FeasibilityRow)]
    cols[1:1] = ["lambda_deg"]
    cols += ["ordering_ok", "chatter_safe"]
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(cols)
    for r in rows:
        rec = r.as_record()
        rec["chatter_safe"] = r.chatter_safe(safety)
        w.writerow([repr(rec[c]) if isinstance(rec[c], float) else rec[c] for c in cols])
    return buf.getvalue()


def default_grid(base: MechParams):
    """1 degree lead-angle steps up to the self-locking pole, 0.01 N m torque steps."""
    pole = math.degrees(math.atan(1.0 / base.mu_st)) if base.mu_st > 0 else 90.0
    lams = np.radians(np.arange(1.0, math.ceil(pole), 1.0))
    lams = lams[lams < math.radians(pole)]
    t_scws = np.round(np.arange(0.0, 2.0 + 1e-9, 0.01), 10)
    return lams, t_scws


def feasible(row: FeasibilityRow, safety: float, speed_floor: float) -> bool:
    return row.ordering_ok and row.chatter_safe(safety) and row.closing_speed >= speed_floor


def optimize(base: MechParams, torque_cap: float = 0.8, speed_floor: float = 0.0,
             safety: float = DEFAULT_SAFETY, lams=None, t_scws=None) -> FeasibilityRow:
    """Design point with the largest holdable grasp force.

    Constraints: correct mode order, chatter ratio at least ``safety``, and
    closing speed (m of finger travel per motor radian) at least
    ``speed_floor``.  Ties go to the larger lead angle, which closes faster.
    """
    if lams is None or t_scws is None:
        g_lams, g_t = default_grid(base)
        lams = g_lams if lams is None else lams
        t_scws = g_t if t_scws is None else t_scws
    best = None
    for row in sweep(lams, t_scws, base, torque_cap):
        if not feasible(row, safety, speed_floor):
            continue
        if best is None:
            best = row
            continue
        if math.isclose(row.f_tip_max, best.f_tip_max, rel_tol=1e-12, abs_tol=0.0):
            if row.lam > best.lam:
                best = row
        elif row.f_tip_max > best.f_tip_max:
            best = row
    if best is None:
        raise Infeasible("no grid point satisfies ordering, chatter and speed constraints")
    return best

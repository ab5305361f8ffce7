"""Quasi-static simulation, control and tuning of a single-motor three-mode gripper."""

__version__ = "0.1.0"

from .contact import ObjectModel, pull_in_displacement, tip_force
from .errors import (
    ConfigParseError,
    FrictionOrdering,
    GripperError,
    InfeasibleScenario,
    Infeasible,
    InvalidParams,
    NonConvergence,
    NonPositiveDimension,
    PhaseRegression,
    SingularLeadAngle,
    StuckState,
    ThresholdExceeded,
)
from .params import Direction, GripperState, MechParams, Mode, preload_static_max, validate_params
from .simulator import Scenario, Trace, run, run_smsA_bench, run_smsB_bench
from .controller import ControlGoal, Controller, run_closed_loop, target_motor_torque
from .scenario_io import dump_scenario, load_preset, load_scenario, parse_scenario
from .tuner import evaluate_point, optimize, sweep

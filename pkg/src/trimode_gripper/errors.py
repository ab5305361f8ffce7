"""Exception types raised across the package."""


class GripperError(Exception):
    """Base class for all library errors."""


class InvalidParams(GripperError, ValueError):
    """A parameter set violates one of its invariants."""


class SingularLeadAngle(InvalidParams):
    """Lead angle at or beyond the pole of the amplification factor."""


class NonPositiveDimension(InvalidParams):
    pass


class FrictionOrdering(InvalidParams):
    """Kinetic friction exceeds static friction."""


class StuckState(GripperError):
    """Neither rotation nor translation of sprocket 1 is possible."""

    def __init__(self, message, condition="rotation/translation"):
        super().__init__(message)
        self.condition = condition


class InfeasibleScenario(GripperError):
    def __init__(self, message, condition=None, time=None):
        super().__init__(message)
        self.condition = condition
        self.time = time


class NonConvergence(GripperError):
    pass


class ThresholdExceeded(GripperError, ValueError):
    """Requested motor torque is at or above the pull-in detection threshold."""


class PhaseRegression(GripperError):
    """Observations imply a control phase earlier than the latched one."""


class Infeasible(GripperError):
    """No design point satisfies the tuning constraints."""


class ConfigParseError(GripperError, ValueError):
    def __init__(self, message, line=0, column=0, path=None):
        where = f"{path or '<string>'}:{line}:{column}"
        super().__init__(f"{where}: {message}")
        self.line = line
        self.column = column
        self.path = path

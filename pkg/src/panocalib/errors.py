"""Exception hierarchy shared across the toolkit."""


class CalibrationError(Exception):
    """Base class for all toolkit errors."""


class InvalidArgument(CalibrationError, ValueError):
    pass


class PoleSingularity(CalibrationError, ValueError):
    """The point lies on (or numerically at) the camera's vertical axis."""


class BranchDomain(CalibrationError, ValueError):
    """The point is outside the x > 0 half-space where the h-form is valid."""


class AllPointsRejected(CalibrationError):
    """Every correspondence failed the branch guards at the current pose."""

    def __init__(self, message: str, iteration: int | None = None):
        super().__init__(message)
        self.iteration = iteration


class DataFormatError(CalibrationError, ValueError):
    """Malformed or out-of-range content in an input file."""


class NumericalFailure(CalibrationError):
    """Optimization or gradient checking failed numerically."""

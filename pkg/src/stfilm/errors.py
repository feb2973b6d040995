"""Exception types shared across the package.

Every error raised on a violated precondition derives from StfilmError so
callers can distinguish library failures from programming mistakes.
"""


class StfilmError(Exception):
    """Base class for all package-specific errors."""


class NegativeBase(StfilmError):
    """Non-integer power requested on a field value <= 0.

    Signals loss of positivity to the caller.
    """


class NonPositiveField(StfilmError):
    """Functional requires a strictly positive field and found min <= 0."""


class AlphaSingular(StfilmError):
    """Power-entropy exponent hit one of its removable singularities."""


class AlphaOutOfRange(StfilmError):
    """Power-entropy exponent outside the admissible interval."""


class MobilityOutOfRange(StfilmError):
    """Mobility exponent n outside (2, 3)."""


class DecayTooWeak(StfilmError):
    """Spectral decay too weak for the colored-noise summability condition."""


class TruncationTooLarge(StfilmError):
    """Spectral truncation K too large for the grid resolution."""


class StepFailure(StfilmError):
    """Time step fell below dt_min while rejecting for positivity."""

    def __init__(self, message, trajectory=None):
        super().__init__(message)
        self.trajectory = trajectory


class LinearSolveFailure(StfilmError):
    """Direct linear solve did not reach the requested residual."""


class ConfigError(StfilmError):
    """Invalid, missing, or unknown configuration key."""

"""Exception types raised across the package."""


class InvalidArgumentError(ValueError):
    """An argument violates a documented precondition."""


class SingularSystemError(ArithmeticError):
    """The penalized normal equations could not be solved.

    Attributes
    ----------
    condition : float
        Estimated 2-norm condition number of the offending system.
    """

    def __init__(self, message: str, condition: float):
        super().__init__(f"{message} (condition estimate {condition:.3e})")
        self.condition = condition


class SegmentTooShort(Exception):
    """A segment is shorter than the minimum fitting length.

    This is a skip signal used by the scan, not an input error.
    """


class InsufficientDataError(RuntimeError):
    """Not enough usable data remains for an estimator."""


class TuningFailedError(RuntimeError):
    """Every configuration of a tuning grid failed."""

    def __init__(self, message: str, diagnostics: dict | None = None):
        super().__init__(message)
        self.diagnostics = diagnostics or {}

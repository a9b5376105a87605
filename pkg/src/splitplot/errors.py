"""Exception hierarchy shared by the library and the command-line front end."""


class SplitPlotError(Exception):
    """Base class for all errors raised by this package."""


class ValidationError(SplitPlotError, ValueError):
    """An input violates a documented invariant."""


class DegenerateDesignError(SplitPlotError):
    """The treatment effect is not estimable under the given design."""


class InfeasibleError(SplitPlotError):
    """No sample size within the search range reaches the target power."""

    def __init__(self, message, variance_floor=None):
        super().__init__(message)
        self.variance_floor = variance_floor


class InestimableError(DegenerateDesignError):
    """The GLS information matrix is singular."""

    def __init__(self, message, null_direction=None):
        super().__init__(message)
        self.null_direction = null_direction or {}

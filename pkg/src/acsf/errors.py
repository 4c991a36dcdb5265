"""Exception hierarchy shared by every module."""


class ACSFError(Exception):
    """Base class for all errors raised by the package."""

    exit_code = 3


class InvalidInputError(ACSFError, ValueError):
    exit_code = 2


class RangeError(InvalidInputError):
    """A requested time or parameter lies outside the admissible range."""


class ResolutionError(InvalidInputError):
    """A sampling grid is too coarse for the requested reconstruction."""

    def __init__(self, message, suggested=None):
        super().__init__(message)
        self.suggested = suggested


class LostConvexityError(ACSFError):
    """A discrete radius of curvature became non-positive."""

    def __init__(self, message, index=None, stage=None):
        super().__init__(message)
        self.index = index
        self.stage = stage


class ConvergenceError(ACSFError):
    def __init__(self, message, residual=None):
        super().__init__(message)
        self.residual = residual


class ConditioningError(ACSFError):
    pass

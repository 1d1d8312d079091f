"""Exception types raised across riplab."""


class RiplabError(Exception):
    """Base class for all riplab errors."""


class ValidationError(RiplabError, ValueError):
    """Input failed a shape, ordering or domain check."""


class DimensionMismatch(ValidationError):
    pass


class ZeroErrorVector(ValidationError):
    """XX^T equals ZZ^T (within tolerance), so the threshold is undefined."""


class DegenerateBeta(ValidationError):
    """X is rank deficient; callers should take the delta = 1 path."""


class SolverStall(RiplabError):
    """Interior-point iteration failed to reach its tolerances.

    The last iterate is attached as ``solution`` so callers can inspect
    residuals.
    """

    def __init__(self, message, solution=None):
        super().__init__(message)
        self.solution = solution

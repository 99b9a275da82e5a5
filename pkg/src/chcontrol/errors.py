"""Exception hierarchy shared by the solvers."""


class CHControlError(Exception):
    """Base class for all package errors."""


class GeometryMismatch(CHControlError, ValueError):
    """A field does not live on the geometry it was paired with."""


class ConfigMismatch(CHControlError, ValueError):
    """Time grids or sizes of the inputs to a solve disagree."""


class ConfigError(CHControlError, ValueError):
    """A run configuration is malformed (missing or unknown key, bad value)."""

    def __init__(self, message, key=None):
        super().__init__(message)
        self.key = key


class DomainViolation(CHControlError, ValueError):
    """A potential was evaluated outside (or too close to the edge of) its domain."""


class NotZeroMean(CHControlError, ValueError):
    """Input to the inverse Neumann operator has a nonzero mean value."""


class SolverDiverged(CHControlError, RuntimeError):
    """An iterative linear solve hit its iteration cap."""


class NewtonDiverged(CHControlError, RuntimeError):
    def __init__(self, message, step=None):
        super().__init__(message)
        self.step = step


class SingularJacobian(CHControlError, RuntimeError):
    """Sparse factorization of a step Jacobian failed."""


class LineSearchStalled(CHControlError, RuntimeError):
    """Armijo backtracking could not find an acceptable step."""

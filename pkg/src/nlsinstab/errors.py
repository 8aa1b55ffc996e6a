"""Exception hierarchy shared by all modules."""


class NLSError(Exception):
    """Base class for every error raised by the package."""


class DomainError(NLSError, ValueError):
    """Non-finite or otherwise inadmissible numerical input."""


class ShapeError(NLSError, ValueError):
    """Fields living on different grids were combined."""


class SubcriticalityError(NLSError, ValueError):
    """The exponent violates 1 < p < 2*-1."""


class NoSolutionError(NLSError):
    """Shooting could not bracket a decaying profile."""


class ConvergenceError(NLSError):
    """An iterative method failed to reach its tolerance."""

    def __init__(self, message, residual=None, history=None):
        super().__init__(message)
        self.residual = residual
        self.history = list(history) if history is not None else []


class TruncationError(NLSError):
    """A profile or potential has not decayed at the box edge."""


class BlowUpError(NLSError):
    """The field became non-finite during time stepping."""

    def __init__(self, message, last_time):
        super().__init__(message)
        self.last_time = last_time


class StabilityError(NLSError):
    """Norm growth exceeded the admissible a-priori rate."""


class DegenerateEigenfunctionError(NLSError):
    """Both Re chi and Im chi lie numerically in the symmetry kernel."""


class PreconditionError(NLSError, ValueError):
    """An API precondition was not met."""

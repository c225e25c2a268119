"""Exception types shared across the package."""


class CPhaseError(Exception):
    """Base class for all package errors."""


class ParameterError(CPhaseError, ValueError):
    """An input parameter is out of range or of an unknown kind."""


class ContractError(CPhaseError):
    """An operation was called outside the regime where its formula holds."""


class ConvergenceError(CPhaseError):
    """Quadrature refinement hit its limit before reaching the tolerance.

    ``estimates`` holds the last two estimates (coarse, fine) so callers can
    judge how far off the result was.
    """

    def __init__(self, message, estimates=(), nodes=None, rel_change=None):
        super().__init__(message)
        self.estimates = tuple(estimates)
        self.nodes = nodes
        self.rel_change = rel_change

"""Exception hierarchy shared across the package."""


class CDPRError(Exception):
    """Base class for all package errors."""


class ValidationError(CDPRError, ValueError):
    """A robot description (or config) violates one of its invariants."""

    def __init__(self, violations):
        if isinstance(violations, str):
            violations = [violations]
        self.violations = list(violations)
        super().__init__("; ".join(self.violations))


class DegenerateGeometry(CDPRError):
    """A cable has (near) zero length or the structure matrix is singular."""


class NoSolution(CDPRError):
    """Cable lengths are geometrically inconsistent."""


class NoConvergence(CDPRError):
    def __init__(self, message, residual=float("nan"), iterations=0):
        super().__init__(message)
        self.residual = residual
        self.iterations = iterations


class Unsupported(CDPRError):
    """The requested operation is not available for this architecture."""


class NumericalBlowup(CDPRError):
    """Plant velocity diverged; usually a sign of unstable gains or time step."""

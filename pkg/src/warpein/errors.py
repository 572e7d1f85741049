"""Exception hierarchy shared by all modules."""

from __future__ import annotations


class WarpError(Exception):
    """Base class for every error raised by warpein."""


class SingularPointError(WarpError, ZeroDivisionError):
    """A formula was evaluated where the warping function (or f*u) vanishes.

    Such points are endpoints of the warped product; callers should treat
    them as such instead of evaluating interior formulas there.
    """


class InconsistentStateError(WarpError):
    """Two independent computations of the same quantity disagree."""


class BoundaryConditionError(WarpError):
    """Initial or endpoint data violate the conditions at f = 0 or u = 0."""


class SingularQuadratureError(WarpError):
    """The integrand c/b of the f-reconstruction is singular (u' = 0)."""


class MalformedProfileError(WarpError):
    """A profile is structurally invalid (grid order, u <= 0 inside, ...)."""


class DomainError(WarpError):
    """A requested grid lies outside a family's domain, or is empty."""


class UnknownFamilyError(WarpError, KeyError):
    """Catalog lookup of a name that is not a family or alias."""

    def __str__(self):
        return str(self.args[0]) if self.args else ""


class ConstraintViolation(WarpError):
    """Constants or a (lambda, mu) cell that no catalog family realises."""


class AmbiguousEndpointError(WarpError):
    """Both f and f' vanish at an endpoint, which no admissible structure allows."""


class InsufficientResolutionError(WarpError):
    """A finite-difference estimate cannot reach the requested tolerance."""


class IntegrationError(WarpError):
    """The integrator failed; ``last_state`` holds the last valid state."""

    def __init__(self, message: str, last_state=None):
        super().__init__(message)
        self.last_state = last_state


class BracketError(WarpError):
    """The shooting bracket is empty or the mismatch does not change sign."""


class ShootingError(WarpError):
    """Root finding did not converge; ``best`` holds the best candidate."""

    def __init__(self, message: str, best=None, iterations: int = 0):
        super().__init__(message)
        self.best = best
        self.iterations = iterations

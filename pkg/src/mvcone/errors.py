"""Exception hierarchy.

Two branches matter for the CLI exit code: input/configuration problems
(``ValidationError``, exit code 2) and numerical failures
(``SolverError``, exit code 3).
"""


class PortfolioError(Exception):
    """Base class for all package errors."""


class ValidationError(PortfolioError):
    """Bad inputs: configuration, schedule, or an infeasible request."""


class SolverError(PortfolioError):
    """A numerical routine failed to produce a certified answer."""


class BadSchedule(ValidationError):
    """Segment boundaries are not strictly increasing or do not cover [0, T]."""


class NonInvertibleVolatility(ValidationError):
    """A volatility matrix is singular or below the eigenvalue floor."""


class NonPositiveInitialWealth(ValidationError):
    """Initial wealth must be strictly positive."""


class OutOfRange(ValidationError):
    """A time argument left the market horizon [0, T]."""


class TargetBelowRiskFree(ValidationError):
    """Requested mean is below pure bond growth; no rational solution."""


class TargetAboveCap(ValidationError):
    """Initial wealth already exceeds the discounted target."""


class DegenerateMarket(ValidationError):
    """The projected market carries no risk premium; only the bond target
    is attainable."""


class DomainError(ValidationError):
    """Arguments outside a formula's domain (e.g. gamma <= 0)."""


class QPNotConverged(SolverError):
    """Active-set projection hit its cycle guard; constraint matrix is
    likely ill-conditioned."""


class NoConvergence(SolverError):
    """Root finding stalled. Carries the last iterate for diagnosis."""

    def __init__(self, message, last_iterate=None, residuals=None):
        super().__init__(message)
        self.last_iterate = last_iterate
        self.residuals = residuals


class ConvexityLost(SolverError):
    """Finite-difference scheme produced a non-convex value slice."""


class ShapeViolation(SolverError):
    """Frontier shape check failed. Carries the offending indices."""

    def __init__(self, message, indices=()):
        super().__init__(message)
        self.indices = tuple(indices)

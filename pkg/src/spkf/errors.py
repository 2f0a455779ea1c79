"""Exception types shared across the estimation library."""


class EstimationError(Exception):
    """Base class for all errors raised by this package."""


class NotPositiveDefinite(EstimationError):
    """A matrix required to be positive (semi)definite failed its pivot check."""


class IntegrationFailure(EstimationError):
    """The integrator produced a non-finite derivative.

    Attributes:
        time: integration time at which the bad evaluation occurred.
    """

    def __init__(self, time: float, message: str = ""):
        self.time = time
        super().__init__(message or f"non-finite derivative at t={time!r}")


class SingularInnovation(EstimationError):
    """The innovation covariance could not be factorized."""


class SingularGeometry(EstimationError):
    """Satellite geometry too poor for a least-squares fix."""


class NonConvergence(EstimationError):
    """An iterative solver exhausted its iteration budget."""


class NoPositiveRoot(EstimationError):
    """A cost-model polynomial has no positive root in the search range."""


class ExactRegime(EstimationError):
    """An order probe saw zero error everywhere; no slope can be fitted."""

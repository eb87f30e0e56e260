"""Exception hierarchy.

Numerical failure modes are first-class outcomes here (an unnormalizable
posterior is a *finding*, not a bug), so each gets its own class and the
CLI maps them onto exit codes: config problems -> 2, numerical -> 3.
"""


class PicalibError(Exception):
    """Base class for all package errors."""


class DomainError(PicalibError, ValueError):
    """Parameter or argument outside its admissible domain."""


class UnsupportedOperationError(PicalibError):
    """Operation not defined for this family (e.g. pushforward of a pmf)."""


class SingularityError(PicalibError):
    """A required derivative or weight vanishes at an evaluation point."""


class ImproperPosteriorError(PicalibError):
    """The weight-times-likelihood product has no finite normalization."""


class EmptyLikelihoodError(PicalibError):
    """Likelihood is zero at every grid node; no update is possible."""


class NonConvergenceError(PicalibError):
    """Optimizer failed to converge; carries the iteration trace."""

    def __init__(self, message, trace=None):
        super().__init__(message)
        self.trace = trace or []


class InvalidInputError(PicalibError):
    """Input object violates a precondition (e.g. boundary MLE fed to the
    Gaussian approximation)."""


class CalibrationInfeasibleError(PicalibError):
    """Too many trials aborted for the coverage estimate to mean anything.

    Carries the partial report so callers can still inspect what happened.
    """

    def __init__(self, message, report=None):
        super().__init__(message)
        self.report = report


class ConfigError(PicalibError):
    """Run configuration failed schema validation."""

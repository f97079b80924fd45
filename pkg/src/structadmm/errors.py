"""Exception and warning types raised across the package."""


class StructAdmmError(Exception):
    """Base class for all package errors."""


class DimensionMismatch(StructAdmmError, ValueError):
    pass


class NotAdmissible(StructAdmmError):
    """The partition does not decompose the weights or constraint sets.

    ``violations`` holds human readable descriptions of the offending
    off-block entries or non-separable sets.
    """

    def __init__(self, message, violations=()):
        super().__init__(message)
        self.violations = list(violations)


class InvalidBeta(StructAdmmError, ValueError):
    pass


class InvalidConfig(StructAdmmError, ValueError):
    pass


class SingularCoupling(StructAdmmError):
    pass


class RankDefect(StructAdmmError):
    pass


class NotPositiveDefinite(StructAdmmError):
    pass


class ZeroReference(StructAdmmError, ValueError):
    pass


class ZeroScale(StructAdmmError, ValueError):
    pass


class Undefined(StructAdmmError):
    """Separation tendency undefined because a row of the link usage is zero."""


class InvalidUseCase(StructAdmmError, ValueError):
    pass


class GenerationFailed(StructAdmmError):
    pass


class OracleNotConverged(StructAdmmError):
    pass


class NonConvergenceWarning(RuntimeWarning):
    """Iteration limit reached with residuals above tolerance."""


class BetaIgnoredWarning(UserWarning):
    """A balancing parameter was passed to the conventional solver."""

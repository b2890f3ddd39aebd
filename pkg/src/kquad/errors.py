"""Exception types shared across the package."""


class KquadError(Exception):
    """Base class for package-specific failures."""


class UnsupportedSmoothnessError(KquadError, ValueError):
    """Requested Sobolev smoothness outside the supported set {1, 2, 3}."""


class DimensionMismatchError(KquadError, ValueError):
    """Point dimension does not match the kernel or measure."""


class DegenerateMeasureError(KquadError, RuntimeError):
    """Rejection sampling against the base measure never accepted."""


class RankExhaustedError(KquadError, RuntimeError):
    """Residual diagonal vanished before the requested node count."""


class AcceptanceStalledError(KquadError, RuntimeError):
    """Rejection loop exceeded its proposal cap; carries the partial trace."""

    def __init__(self, message, trace=None):
        super().__init__(message)
        self.trace = trace


class InvalidEnvelopeError(KquadError, RuntimeError):
    """Optimized acceptance envelope fell below an observed ratio."""


class NonPositivePivotError(KquadError, ValueError):
    """Attempted to extend a Cholesky factor with a non-positive pivot."""


class SingularGramError(KquadError, RuntimeError):
    """Gram matrix could not be factorized even after regularization."""


class ConfigError(KquadError, ValueError):
    """Invalid experiment configuration; names the offending key."""

    def __init__(self, key, message):
        super().__init__(f"{key}: {message}")
        self.key = key

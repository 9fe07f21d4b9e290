"""Exception types shared across the toolkit."""


class PrivLQGError(Exception):
    """Base class for all toolkit errors."""


class DimensionMismatch(PrivLQGError):
    """Sequence lengths or matrix shapes are inconsistent."""


class NotPositiveDefinite(PrivLQGError):
    """A matrix required to be (semi)definite fails the eigenvalue test.

    The message names the offending matrix and its minimum eigenvalue.
    """

    def __init__(self, name, min_eigenvalue):
        self.name = name
        self.min_eigenvalue = float(min_eigenvalue)
        super().__init__(
            f"{name} is not positive definite (min eigenvalue "
            f"{self.min_eigenvalue:.6e})"
        )


class NonFiniteEntry(PrivLQGError):
    """A matrix or vector contains NaN or infinity."""


class SingularInnovation(PrivLQGError):
    """B'SB + R is numerically singular; upstream validation was bypassed."""


class Infeasible(PrivLQGError):
    """The budget admits no positive definite covariance plan.

    Carries a human-readable certificate explanation.
    """

    def __init__(self, certificate):
        self.certificate = certificate
        super().__init__(certificate)


class MaxIterations(PrivLQGError):
    """The solver hit its iteration cap before reaching tolerance."""

    def __init__(self, message, stats=None):
        self.stats = stats
        super().__init__(message)


class NumericalBreakdown(PrivLQGError):
    """A factorization failed irrecoverably inside the solver."""


class NegativeIncrement(PrivLQGError):
    """The information increment P_filt^-1 - P_pred^-1 has a negative eigenvalue."""


class SingularInnovationCovariance(PrivLQGError):
    """C P C' + Sigma_V is singular; cannot happen for Sigma_V > 0."""


class IllConditioned(PrivLQGError):
    """A covariance block is too ill-conditioned for reliable logdet ratios."""


class UnsupportedDimension(PrivLQGError):
    """Operation defined only for scalar (n = 1) instances."""


class OutOfRange(PrivLQGError):
    """Argument outside the mathematically valid range."""


class ConfigError(PrivLQGError):
    """Malformed or inconsistent run configuration."""

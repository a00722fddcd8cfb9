"""Exception types raised across the package."""

import numpy as np


class CircularDomainError(ValueError):
    """Input outside the domain of a circular operation."""


class UndefinedDirectionError(CircularDomainError):
    """Direction of the zero vector was requested."""


class ConfigurationError(ValueError):
    """Invalid model, prior or design configuration."""


class NotPositiveDefiniteError(np.linalg.LinAlgError):
    """Cholesky factorization failed.

    Attributes
    ----------
    minor : int
        Order (1-based) of the leading minor that is not positive definite.
    """

    def __init__(self, minor, message=None):
        self.minor = int(minor)
        super().__init__(
            message or f"leading minor of order {self.minor} is not positive definite"
        )


class InitializationError(RuntimeError):
    """Sampler could not be started from the requested state."""

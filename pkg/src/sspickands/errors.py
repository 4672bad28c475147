"""Exception types shared across the package."""

import numpy as np


class ParameterError(ValueError):
    """A process or run parameter lies outside its admissible range."""


class DomainError(ValueError):
    """A function was evaluated outside its domain (e.g. negative time)."""


class DivergenceError(ValueError):
    """The requested quantity is infinite."""


class ConsistencyError(RuntimeError):
    """A kernel produced values that violate a structural identity."""


class NotPositiveDefiniteError(np.linalg.LinAlgError):
    """Cholesky factorization failed even at the largest jitter level."""


class InsufficientSamplesError(RuntimeError):
    """Monte Carlo budget too small for the requested rare event.

    ``required_paths`` carries the path count the pilot run suggests.
    """

    def __init__(self, message, required_paths=None):
        super().__init__(message)
        self.required_paths = required_paths

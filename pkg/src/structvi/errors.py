"""Exception types shared across the package."""

import numpy as np


class NotPositiveDefiniteError(np.linalg.LinAlgError):
    """A matrix required to be positive definite failed its factorization."""


class DivergenceError(RuntimeError):
    """Training produced a non-finite gradient or objective value.

    Carries the offending step and a snapshot of the parameters at that step
    so model-authoring mistakes can be debugged rather than silently clamped.
    """

    def __init__(self, message, step, params):
        super().__init__(message)
        self.step = step
        self.params = params

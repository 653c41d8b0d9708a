"""
Core functionality for dremkit.

This module contains base types, interfaces, and the error hierarchy used throughout the package.
"""

from typing import Callable, Optional, Protocol, Sequence

import numpy as np
import numpy.typing as npt

Vector = npt.NDArray[np.float64]
Matrix = npt.NDArray[np.float64]


class DerivativeFunction(Protocol):
    """Right-hand side of an ODE advanced by the fixed-step integrator."""

    def __call__(self, t: float, state: Vector) -> Vector:
        """Return the time derivative of ``state`` at time ``t``."""
        ...


class VectorMap(Protocol):
    """A smooth map between Euclidean spaces."""

    def __call__(self, x: Vector) -> Vector: ...


class JacobianMap(Protocol):
    """Analytic Jacobian of a :class:`VectorMap`."""

    def __call__(self, x: Vector) -> Matrix: ...


class DremError(Exception):
    """Base class for all dremkit errors."""


class DimensionError(DremError, ValueError):
    """Raised when array shapes are inconsistent."""


class SingularCoordinateError(DremError, ArithmeticError):
    """Raised when an inverse map or a controller hits a singular coordinate."""

    def __init__(self, component: str, value: float, detail: str = ""):
        self.component = component
        self.value = value
        message = f"singular coordinate {component} = {value:.3e}"
        if detail:
            message = f"{message} ({detail})"
        super().__init__(message)


class GainValidationError(DremError, ValueError):
    """Raised when discrete-time estimator gains violate the step conditions."""


class GainTooLargeError(GainValidationError):
    """sigma <= 0: the adaptation gain exceeds 2 rho / (nu^2 lambda_max(P)^2)."""


class NormalizationError(GainValidationError):
    """kappa is smaller than max{1, sigma}."""


class IntegrationError(DremError, ArithmeticError):
    """Raised when the integrator meets a non-finite derivative or state."""

    def __init__(self, step: int, t: float, detail: str = ""):
        self.step = step
        self.t = t
        message = f"non-finite value at step {step} (t = {t:.6g})"
        if detail:
            message = f"{message}: {detail}"
        super().__init__(message)


class ConfigError(DremError, ValueError):
    """Raised for unknown or malformed configuration keys."""

    def __init__(self, key: str, valid_keys: Sequence[str] = (), detail: str = ""):
        self.key = key
        self.valid_keys = tuple(valid_keys)
        message = detail or f"unknown configuration key '{key}'"
        if self.valid_keys:
            message = f"{message}; valid keys: {', '.join(self.valid_keys)}"
        super().__init__(message)


# Common type aliases
FilePath = str
ProcessingResult = tuple[Optional[str], Optional[str]]  # (output path, error)
Reference = Callable[[float], tuple[Vector, Vector, Vector]]  # t -> (q*, dq*, ddq*)

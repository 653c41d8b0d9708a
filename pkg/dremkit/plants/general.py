"""
Plants of the form x' = F(x, u) + R(x) S(theta) and their regression filter.
"""

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from dremkit.core import DimensionError, Matrix, Vector
from dremkit.core.npre import FactorizedNPRE

from .appc import indirect_npre


@dataclass(frozen=True, eq=False)
class GeneralCTPlant:
    """
    Nonlinearly parameterized plant with a known stabilizing law.

    Attributes:
        n: State dimension
        m: Input dimension
        F: Known part of the vector field, (x, u) -> R^n
        R: Regressor multiplying S(theta), x -> R^{n x p}
        npre: Factorization of S used by the estimator
        beta: Certainty-equivalent control (x, theta_hat, t) -> R^m
    """

    n: int
    m: int
    F: Callable[[Vector, Vector], Vector]
    R: Callable[[Vector], Matrix]
    npre: FactorizedNPRE
    beta: Callable[[Vector, Vector, float], Vector]

    def __post_init__(self) -> None:
        if self.npre.n != self.n:
            raise DimensionError(
                f"plant has {self.n} states but the regression has {self.npre.n} rows"
            )

    def vector_field(self, x: Vector, u: Vector, theta: Vector) -> Vector:
        return np.asarray(self.F(x, u) + self.R(x) @ self.npre.map(theta), dtype=float)


@dataclass(frozen=True, eq=False)
class PlantFilterState:
    """Filter (z, Omega) whose output y = z + x satisfies y = Omega S(theta)."""

    z: Vector
    Omega: Matrix
    lam: float = 1.0

    def __post_init__(self) -> None:
        if self.lam <= 0.0:
            raise DimensionError(f"filter pole must be positive, got {self.lam}")
        if self.Omega.shape[0] != self.z.size:
            raise DimensionError(f"Omega {self.Omega.shape} does not match z {self.z.shape}")

    @classmethod
    def matched(cls, x0: Vector, p: int, lam: float = 1.0) -> "PlantFilterState":
        """z(0) = -x(0) and Omega(0) = 0, so the regression holds exactly from t = 0."""
        x0 = np.asarray(x0, dtype=float)
        return cls(-x0.copy(), np.zeros((x0.size, p)), lam)

    def output(self, x: Vector) -> Vector:
        return np.asarray(self.z + x, dtype=float)

    def as_vector(self) -> Vector:
        return np.concatenate([self.z, self.Omega.ravel()])

    @classmethod
    def from_vector(cls, values: Vector, n: int, p: int, lam: float) -> "PlantFilterState":
        return cls(values[:n].copy(), values[n : n + n * p].reshape(n, p).copy(), lam)


def general_plant_filter_derivative(
    state: PlantFilterState, x: Vector, u: Vector, plant: GeneralCTPlant
) -> tuple[Vector, Matrix, Vector]:
    """
    Right-hand side of the regression filter.

    Args:
        state: Current (z, Omega)
        x: Plant state
        u: Applied input
        plant: Supplies F and R

    Returns:
        Tuple (dz, dOmega, y) with dz = -lam (z + x) - F(x, u), dOmega = -lam Omega + R(x)
        and the filter output y = z + x
    """
    lam = state.lam
    y = state.output(x)
    dz = -lam * y - np.asarray(plant.F(x, u), dtype=float)
    dOmega = -lam * state.Omega + np.asarray(plant.R(x), dtype=float)
    return dz, dOmega, y


def scalar_tracking_plant(gain: float = 2.0) -> GeneralCTPlant:
    """
    x' = u + theta x + theta^3 sin x, tracking sin t.

    The law cancels the parametric terms with the estimate and adds
    -gain (x - sin t) + cos t.
    """

    def F(x: Vector, u: Vector) -> Vector:
        return np.asarray(u, dtype=float)

    def R(x: Vector) -> Matrix:
        return np.array([[x[0], math.sin(x[0])]])

    def beta(x: Vector, theta_hat: Vector, t: float) -> Vector:
        th = float(theta_hat[0])
        return np.array(
            [-th * x[0] - th**3 * math.sin(x[0]) - gain * (x[0] - math.sin(t)) + math.cos(t)]
        )

    return GeneralCTPlant(n=1, m=1, F=F, R=R, npre=indirect_npre(), beta=beta)

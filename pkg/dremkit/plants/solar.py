"""
Solar-heated house: storage temperature driven by a fan and solar intensity.

The storage temperature obeys a bilinear difference equation that is linear in the
six-vector S(theta); the change eta = (-t1, 1 - t2, t1 t3, 1 - t4) makes the good map
the identity.
"""

import math
from dataclasses import dataclass, replace
from typing import TYPE_CHECKING, Union

import numpy as np

from dremkit.core import Matrix, SingularCoordinateError, Vector
from dremkit.core.estimators import GradientBaseline, dt_gradient_baseline_step
from dremkit.core.npre import Box, FactorizedNPRE, NonlinearMap, ParameterChange
from dremkit.sim.trace import Column

if TYPE_CHECKING:
    from dremkit.sim.scenarios import Scenario


THETA_TRUE = (0.5, 0.5, 0.5, 0.5)
DOMAIN_BOX: Box = ((0.1, 1.0), (0.1, 1.0), (0.1, 1.0), (0.1, 1.0))
SAMPLING_PERIOD_MIN = 10.0


def solar_S(theta: Vector) -> Vector:
    t1, t2, t3, t4 = theta
    return np.array([1 - t2, 1 - t4, (t4 - 1) * (1 + t2), t1 * t3, -t1, t1 * (1 + t2)])


def solar_S_jacobian(theta: Vector) -> Matrix:
    t1, t2, t3, t4 = theta
    return np.array(
        [
            [0.0, -1.0, 0.0, 0.0],
            [0.0, 0.0, 0.0, -1.0],
            [0.0, t4 - 1, 0.0, 1 + t2],
            [t3, 0.0, t1, 0.0],
            [-1.0, 0.0, 0.0, 0.0],
            [1 + t2, t1, 0.0, 0.0],
        ]
    )


def _forward(theta: Vector) -> Vector:
    t1, t2, t3, t4 = theta
    return np.array([-t1, 1 - t2, t1 * t3, 1 - t4])


def _inverse(eta: Vector) -> Vector:
    if eta[0] == 0.0:
        raise SingularCoordinateError("eta[0]", 0.0, "solar inverse map")
    return np.array([-eta[0], 1 - eta[1], -eta[2] / eta[0], 1 - eta[3]])


def _inverse_jacobian(eta: Vector) -> Matrix:
    e1, _, e3, _ = eta
    return np.array(
        [
            [-1.0, 0.0, 0.0, 0.0],
            [0.0, -1.0, 0.0, 0.0],
            [e3 / e1**2, 0.0, -1.0 / e1, 0.0],
            [0.0, 0.0, 0.0, -1.0],
        ]
    )


def solar_change() -> ParameterChange:
    """Change with good map G(eta) = eta, P = I, rho = 2, nu = 1."""
    return ParameterChange(
        forward=_forward,
        inverse=_inverse,
        inverse_jacobian=_inverse_jacobian,
        permutation=(4, 0, 3, 1, 5, 2),
        selector_rows=(0, 1, 2, 3),
        P=np.eye(4),
        rho=2.0,
        nu=1.0,
    )


def solar_npre() -> FactorizedNPRE:
    return FactorizedNPRE(
        map=NonlinearMap(4, 6, solar_S, solar_S_jacobian, DOMAIN_BOX),
        change=solar_change(),
        n=1,
        name="solar",
    )


def irradiance(k: int, peak: float = 20.0, period: int = 32, decay: float = 64.0) -> float:
    """Half-sinusoid day profile with a decaying peak; zero before the first sample."""
    if k < 0:
        return 0.0
    return peak * math.exp(-k / decay) * max(0.0, math.sin(2 * math.pi * k / period))


def fan_input(k: int, levels: tuple[float, float] = (1.0, 0.5), period: int = 24) -> float:
    """Two-level pulse train, first level during the first half of each period."""
    if k < 0:
        return levels[0]
    return levels[0] if (k % period) < period // 2 else levels[1]


def solar_regressor(y1: float, y2: float, u1: float, u2: float, I2: float) -> Matrix:
    """Omega(k) from y(k-1), y(k-2), u(k-1), u(k-2), I(k-2)."""
    if u2 == 0.0:
        raise SingularCoordinateError("u(k-2)", u2, "fan input two samples back must be nonzero")
    ratio = u1 / u2
    return np.array([[y1, y1 * ratio, y2 * ratio, u1 * I2, u1 * y1, u1 * y2]])


@dataclass(frozen=True)
class SolarHouse:
    """Storage temperature history; ``y`` holds (y(k-1), y(k-2))."""

    theta: tuple[float, ...] = THETA_TRUE
    y: tuple[float, float] = (0.0, 0.0)

    @property
    def S(self) -> Vector:
        return solar_S(np.array(self.theta))

    def push(self, y_k: float) -> "SolarHouse":
        return replace(self, y=(y_k, self.y[0]))


def solar_step(house: SolarHouse, u_prev: tuple[float, float], I_prev2: float) -> float:
    """
    y_p(k) from the stored temperatures and the inputs u(k-1), u(k-2), I(k-2).

    Args:
        house: Plant with (y(k-1), y(k-2))
        u_prev: (u(k-1), u(k-2)); u(k-2) must be nonzero
        I_prev2: Solar intensity I(k-2)

    Returns:
        The storage temperature at sample k
    """
    omega = solar_regressor(house.y[0], house.y[1], u_prev[0], u_prev[1], I_prev2)
    return float((omega @ house.S)[0])


class SolarLoop:
    """Open-loop identification run; the gradient baseline rides on the same data."""

    def __init__(self, scenario: "Scenario"):
        self.npre = solar_npre()
        self.house = SolarHouse(tuple(scenario.theta))
        self.levels = (scenario.u_levels[0], scenario.u_levels[1])
        self.period = int(scenario.u_period)
        self.peak = scenario.irradiance_peak
        self.S_true = self.house.S
        eta_hat0 = scenario.initial_eta(self.npre, self.npre.to_eta(np.array(scenario.theta)))
        S_hat0 = scenario.S_hat0 or tuple(self.npre.transformed_map(eta_hat0))
        self.baseline = GradientBaseline(np.array(S_hat0, dtype=float), scenario.gamma)
        self.prior_residual = 0.0
        self.residual = 0.0
        self._y = 0.0

    columns = (
        Column("y_p"),
        Column("u"),
        Column("I"),
        Column("S_hat", 6),
        Column("S_error", oracle=True),
        Column("residual_prior"),
        Column("residual"),
    )

    def true_eta(self, k: int) -> Vector:
        return self.npre.to_eta(np.array(self.house.theta))

    def regression(self, k: int) -> tuple[Vector, Matrix]:
        u1, u2 = self.u(k - 1), self.u(k - 2)
        I2 = irradiance(k - 2, self.peak)
        omega = solar_regressor(self.house.y[0], self.house.y[1], u1, u2, I2)
        y = omega @ self.S_true
        self.house = self.house.push(float(y[0]))
        self._y = float(y[0])

        self.prior_residual = float((y - omega @ self.baseline.S_hat)[0])
        self.baseline = replace(
            self.baseline, S_hat=dt_gradient_baseline_step(self.baseline, omega, y)
        )
        self.residual = float((y - omega @ self.baseline.S_hat)[0])
        return y, omega

    def u(self, k: int) -> float:
        return fan_input(k, self.levels, self.period)

    def actuate(self, k: int, theta_hat: Vector) -> dict[str, Union[float, Vector]]:
        return {
            "y_p": self._y,
            "u": self.u(k),
            "I": irradiance(k, self.peak),
            "S_hat": self.baseline.S_hat.copy(),
            "S_error": float(np.linalg.norm(self.baseline.S_hat - self.S_true)),
            "residual_prior": self.prior_residual,
            "residual": self.residual,
        }

    def tracking_error(self) -> float:
        return 0.0

"""
Adaptive pole placement with a deadbeat target.

Indirect scheme: estimate the plant parameter theta of
``y(k+1) + theta y(k) = u(k) + theta^3 u(k-1)`` and solve the Bezout equation online.
Direct scheme: estimate the controller coefficients of a second-order plant
through a five-dimensional regression whose good map is the identity.
"""

import logging
import math
from dataclasses import dataclass, replace
from typing import TYPE_CHECKING, Callable, Sequence, Union

import numpy as np

from dremkit.core import DimensionError, Matrix, SingularCoordinateError, Vector
from dremkit.core.estimators import GradientBaseline, dt_gradient_baseline_step
from dremkit.core.npre import Box, FactorizedNPRE, NonlinearMap, ParameterChange
from dremkit.sim.trace import Column

if TYPE_CHECKING:
    from dremkit.sim.scenarios import Scenario

logger = logging.getLogger(__name__)

SINGULARITY_TOLERANCE = 1e-9
INDIRECT_BOX: Box = ((-0.95, 0.95),)
DIRECT_BOX: Box = ((0.5, 1.5), (0.2, 1.0), (0.1, 1.0), (0.1, 1.0))


def _identity(x: Vector) -> Vector:
    return np.array(x, dtype=float)


def indirect_S(theta: Vector) -> Vector:
    return np.array([theta[0], theta[0] ** 3])


def indirect_S_jacobian(theta: Vector) -> Matrix:
    return np.array([[1.0], [3.0 * theta[0] ** 2]])


def indirect_change() -> ParameterChange:
    """Identity change; the good map keeps the first component, G(theta) = theta."""
    return ParameterChange(
        forward=_identity,
        inverse=_identity,
        inverse_jacobian=lambda eta: np.eye(1),
        permutation=(0, 1),
        selector_rows=(0,),
        P=np.eye(1),
        rho=2.0,
        nu=1.0,
    )


def indirect_npre() -> FactorizedNPRE:
    return FactorizedNPRE(
        map=NonlinearMap(1, 2, indirect_S, indirect_S_jacobian, INDIRECT_BOX),
        change=indirect_change(),
        n=1,
        name="appc-indirect",
    )


def indirect_bezout(theta: float) -> tuple[float, float]:
    """
    Solve [[1, 1], [theta, theta^3]] (l1, p0) = (-theta, 0).

    Raises:
        SingularCoordinateError: theta in {-1, 0, 1}, where the Sylvester matrix is singular
    """
    det = theta**3 - theta
    if abs(det) < SINGULARITY_TOLERANCE:
        raise SingularCoordinateError("theta^3 - theta", det, "Sylvester matrix singular")
    l1, p0 = np.linalg.solve(np.array([[1.0, 1.0], [theta, theta**3]]), np.array([-theta, 0.0]))
    return float(l1), float(p0)


def appc_indirect_control(theta_hat: float, y_p: float, u_prev: float, r: float) -> float:
    """u(k) = -(theta y_p(k) - theta^3 u(k-1)) / (theta^2 - 1) + r(k)."""
    denominator = theta_hat**2 - 1.0
    if abs(denominator) < SINGULARITY_TOLERANCE:
        raise SingularCoordinateError("theta_hat^2 - 1", denominator, "indirect control")
    return -(theta_hat * y_p - theta_hat**3 * u_prev) / denominator + r


def appc_indirect_overparam_control(S_hat: Vector, y_p: float, u_prev: float, r: float) -> float:
    """Control from an estimate of (theta, theta^3); singular on the line S1 = S2."""
    s1, s2 = float(S_hat[0]), float(S_hat[1])
    if abs(s2 - s1) < SINGULARITY_TOLERANCE:
        raise SingularCoordinateError("S_hat[1] - S_hat[0]", s2 - s1, "overparameterized control")
    return -(s1**2 * y_p - s1 * s2 * u_prev) / (s2 - s1) + r


def direct_S(theta: Vector) -> Vector:
    t1, t2, t3, t4 = theta
    return np.array([t1 * t3, t2 * t3, t1, t1 * t4 + t2, t2 * t4])


def direct_S_jacobian(theta: Vector) -> Matrix:
    t1, t2, t3, t4 = theta
    return np.array(
        [
            [t3, 0.0, t1, 0.0],
            [0.0, t3, t2, 0.0],
            [1.0, 0.0, 0.0, 0.0],
            [t4, 1.0, 0.0, t1],
            [0.0, t4, 0.0, t2],
        ]
    )


def _direct_forward(theta: Vector) -> Vector:
    t1, t2, t3, t4 = theta
    return np.array([t1, t2 * t3, t1 * t3, t2 * t4])


def _direct_inverse(eta: Vector) -> Vector:
    for i in (0, 1, 2):
        if eta[i] == 0.0:
            raise SingularCoordinateError(f"eta[{i}]", 0.0, "direct APPC inverse map")
    e1, e2, e3, e4 = eta
    return np.array([e1, e2 * e1 / e3, e3 / e1, e3 * e4 / (e2 * e1)])


def _direct_inverse_jacobian(eta: Vector) -> Matrix:
    e1, e2, e3, e4 = eta
    return np.array(
        [
            [1.0, 0.0, 0.0, 0.0],
            [e2 / e3, e1 / e3, -e1 * e2 / e3**2, 0.0],
            [-e3 / e1**2, 0.0, 1.0 / e1, 0.0],
            [
                -e3 * e4 / (e1**2 * e2),
                -e3 * e4 / (e1 * e2**2),
                e4 / (e1 * e2),
                e3 / (e1 * e2),
            ],
        ]
    )


def direct_change() -> ParameterChange:
    return ParameterChange(
        forward=_direct_forward,
        inverse=_direct_inverse,
        inverse_jacobian=_direct_inverse_jacobian,
        permutation=(2, 1, 0, 4, 3),
        selector_rows=(0, 1, 2, 3),
        P=np.eye(4),
        rho=2.0,
        nu=1.0,
    )


def direct_npre() -> FactorizedNPRE:
    return FactorizedNPRE(
        map=NonlinearMap(4, 5, direct_S, direct_S_jacobian, DIRECT_BOX),
        change=direct_change(),
        n=1,
        name="appc-direct",
    )


def direct_bezout(a1: float, b1: float, b2: float) -> tuple[float, float]:
    """
    Deadbeat controller (p0, l1) for A = 1 + a1 q^-1, B = b1 q^-1 + b2 q^-2; p1 = 0.

    Raises:
        SingularCoordinateError: A and B share a root (b2 - a1 b1 = 0)
    """
    det = b2 - a1 * b1
    if abs(det) < SINGULARITY_TOLERANCE:
        raise SingularCoordinateError("b2 - a1 b1", det, "plant polynomials not coprime")
    return a1**2 / det, -a1 * b2 / det


@dataclass(frozen=True)
class DirectPlant:
    """Coefficients (a1, b1, b2) of y(k) = -a1 y(k-1) + b1 u(k-1) + b2 u(k-2)."""

    a1: float = -0.8
    b1: float = 1.0
    b2: float = 0.5

    def __post_init__(self) -> None:
        if self.b1 == 0.0 and self.b2 == 0.0:
            raise DimensionError("B polynomial must be nonzero")

    @property
    def theta(self) -> Vector:
        """Controller-side parameters (b1, b2, p0, l1)."""
        p0, l1 = direct_bezout(self.a1, self.b1, self.b2)
        return np.array([self.b1, self.b2, p0, l1])


def direct_controller(theta_hat: Vector, y_p: float, u_prev: float, r: float) -> float:
    """u(k) = r(k) - l1 u(k-1) - p0 y_p(k), reading p0 and l1 from (b1, b2, p0, l1)."""
    return r - float(theta_hat[3]) * u_prev - float(theta_hat[2]) * y_p


def reference_signal(amplitude: float, frequencies: Sequence[float]) -> Callable[[int], float]:
    """Sum of sines r(k) = A sum_i sin(w_i k), zero before the first sample."""
    frequencies = tuple(frequencies)

    def r(k: int) -> float:
        if k < 0:
            return 0.0
        return amplitude * sum(math.sin(w * k) for w in frequencies)

    return r


class IndirectLoop:
    """
    Closed loop of the indirect scheme, optionally switching theta mid-run.

    With ``estimator = "gradient"`` the control uses the overparameterized gradient
    estimate of (theta, theta^3); otherwise it uses the DREM estimate it is given.
    """

    columns = (
        Column("y_p"),
        Column("u"),
        Column("r"),
        Column("theta_plant", oracle=True),
        Column("S_hat", 2),
        Column("control_held"),
    )

    def __init__(self, scenario: "Scenario"):
        if not scenario.theta:
            raise DimensionError("appc-indirect needs the plant parameter theta")
        self.npre = indirect_npre()
        self.theta_before = float(scenario.theta[0])
        self.theta_after = float(scenario.theta_after[0]) if scenario.theta_after else self.theta_before
        self.switch = int(scenario.switch_sample)
        self.r = reference_signal(scenario.r_amplitude, scenario.r_frequencies)
        self.use_gradient = scenario.estimator == "gradient"

        theta_hat0 = scenario.theta_hat0 or scenario.theta
        S_hat0 = scenario.S_hat0 or tuple(indirect_S(np.array(theta_hat0, dtype=float)))
        self.baseline = GradientBaseline(np.array(S_hat0, dtype=float), scenario.gamma)
        self.admissible = float(theta_hat0[0])

        self.y = (0.0, 0.0)  # y(k), y(k-1)
        self.u_hist = (0.0, 0.0)  # u(k-1), u(k-2)
        self._error = 0.0

    def plant_theta(self, k: int) -> float:
        """Parameter acting from sample k to k+1."""
        if self.switch >= 0 and k >= self.switch:
            return self.theta_after
        return self.theta_before

    def true_eta(self, k: int) -> Vector:
        return np.array([self.plant_theta(k - 1)])

    def regression(self, k: int) -> tuple[Vector, Matrix]:
        y_reg = np.array([self.y[0] - self.u_hist[0]])
        omega = np.array([[-self.y[1], self.u_hist[1]]])
        self.baseline = replace(
            self.baseline, S_hat=dt_gradient_baseline_step(self.baseline, omega, y_reg)
        )
        return y_reg, omega

    def _control(self, theta_hat: Vector, r: float) -> tuple[float, bool]:
        y_k, u1 = self.y[0], self.u_hist[0]
        if self.use_gradient:
            try:
                return appc_indirect_overparam_control(self.baseline.S_hat, y_k, u1, r), False
            except SingularCoordinateError as e:
                logger.warning(f"Holding previous control: {e}")
                return u1, True
        theta = float(theta_hat[0])
        if not -1.0 < theta < 1.0:
            logger.warning(f"Estimate {theta:g} outside (-1, 1), using last admissible {self.admissible:g}")
            return appc_indirect_control(self.admissible, y_k, u1, r), True
        try:
            u = appc_indirect_control(theta, y_k, u1, r)
            self.admissible = theta
            return u, False
        except SingularCoordinateError as e:
            logger.warning(f"Using last admissible estimate {self.admissible:g}: {e}")
            return appc_indirect_control(self.admissible, y_k, u1, r), True

    def actuate(self, k: int, theta_hat: Vector) -> dict[str, Union[float, Vector]]:
        r = self.r(k)
        u, held = self._control(theta_hat, r)
        y_k, u1 = self.y[0], self.u_hist[0]
        theta = self.plant_theta(k)
        target = self.r(k - 1) + self.plant_theta(k - 1) ** 3 * self.r(k - 2)
        self._error = y_k - target

        y_next = -theta * y_k + u + theta**3 * u1
        self.y = (y_next, y_k)
        self.u_hist = (u, u1)
        return {
            "y_p": y_k,
            "u": u,
            "r": r,
            "theta_plant": self.plant_theta(k - 1),
            "S_hat": self.baseline.S_hat.copy(),
            "control_held": float(held),
        }

    def tracking_error(self) -> float:
        """y_p(k) minus the deadbeat target r(k-1) + theta^3 r(k-2)."""
        return self._error


class DirectLoop:
    """Closed loop of the direct scheme; the estimate supplies the controller (p0, l1)."""

    columns = (
        Column("y_p"),
        Column("u"),
        Column("r"),
        Column("S_hat", 5),
        Column("S_error", oracle=True),
    )

    def __init__(self, scenario: "Scenario"):
        if scenario.estimator == "gradient":
            raise DimensionError("appc-direct controls from the DREM estimate only")
        self.npre = direct_npre()
        self.plant = DirectPlant(*scenario.plant_coefficients) if scenario.plant_coefficients else DirectPlant()
        self.theta = self.plant.theta
        self.S_true = direct_S(self.theta)
        self.r = reference_signal(scenario.r_amplitude, scenario.r_frequencies)

        S_hat0 = scenario.S_hat0 or tuple(self.S_true)
        self.baseline = GradientBaseline(np.array(S_hat0, dtype=float), scenario.gamma)

        self.y = (0.0, 0.0, 0.0)  # y(k), y(k-1), y(k-2)
        self.u_hist = (0.0, 0.0, 0.0)  # u(k-1), u(k-2), u(k-3)
        self._error = 0.0

    def true_eta(self, k: int) -> Vector:
        return self.npre.to_eta(self.theta)

    def regression(self, k: int) -> tuple[Vector, Matrix]:
        omega = np.array([[self.y[1], self.y[2], *self.u_hist]])
        y = np.array([self.y[0]])
        self.baseline = replace(
            self.baseline, S_hat=dt_gradient_baseline_step(self.baseline, omega, y)
        )
        return y, omega

    def actuate(self, k: int, theta_hat: Vector) -> dict[str, Union[float, Vector]]:
        r = self.r(k)
        y_k, u1 = self.y[0], self.u_hist[0]
        u = direct_controller(theta_hat, y_k, u1, r)
        self._error = y_k - self.plant.b1 * self.r(k - 1) - self.plant.b2 * self.r(k - 2)

        y_next = -self.plant.a1 * y_k + self.plant.b1 * u + self.plant.b2 * u1
        self.y = (y_next, y_k, self.y[1])
        self.u_hist = (u, u1, self.u_hist[1])
        return {
            "y_p": y_k,
            "u": u,
            "r": r,
            "S_hat": self.baseline.S_hat.copy(),
            "S_error": float(np.linalg.norm(self.baseline.S_hat - self.S_true)),
        }

    def tracking_error(self) -> float:
        """y_p(k) minus the deadbeat target b1 r(k-1) + b2 r(k-2)."""
        return self._error

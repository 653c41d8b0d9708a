"""
Two-link planar manipulator with point masses at the link ends.

Physical parameters theta = (l1, l2, m1, m2) enter the dynamics through the five
entries of S(theta); the inertia matrix, Coriolis matrix and potential energy are
linear in S. This module provides the mechanics, the regressor filters that turn
the dynamics into y = Omega S(theta), and the Slotine-Li and computed-torque laws.
"""

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from dremkit.core import (
    DimensionError,
    Matrix,
    Reference,
    SingularCoordinateError,
    Vector,
)
from dremkit.core.npre import Box, FactorizedNPRE, NonlinearMap, ParameterChange
from dremkit.sim.integrators import rk4_step


GRAVITY = 9.81
THETA_TRUE = (0.7, 0.8, 1.5, 0.5)
DOMAIN_BOX: Box = ((0.65, 0.75), (0.75, 0.85), (1.0, 2.0), (0.45, 0.55))


def robot_S(theta: Vector) -> Vector:
    l1, l2, m1, m2 = theta
    return np.array(
        [
            l2**2 * m2 + l1**2 * (m1 + m2),
            l1 * l2 * m2,
            l2**2 * m2,
            l2 * m2,
            l1 * (m1 + m2),
        ]
    )


def robot_S_jacobian(theta: Vector) -> Matrix:
    l1, l2, m1, m2 = theta
    return np.array(
        [
            [2 * l1 * (m1 + m2), 2 * l2 * m2, l1**2, l2**2 + l1**2],
            [l2 * m2, l1 * m2, 0.0, l1 * l2],
            [0.0, 2 * l2 * m2, 0.0, l2**2],
            [0.0, m2, 0.0, l2],
            [m1 + m2, 0.0, l1, l1],
        ]
    )


def _forward(theta: Vector) -> Vector:
    l1, l2, m1, m2 = theta
    return np.array([l1, l2, l2 * m2, l1 * (m1 + m2)])


def _inverse(eta: Vector) -> Vector:
    for i in (0, 1):
        if eta[i] == 0.0:
            raise SingularCoordinateError(f"eta[{i}]", float(eta[i]), "robot inverse map")
    return np.array([eta[0], eta[1], eta[3] / eta[0] - eta[2] / eta[1], eta[2] / eta[1]])


def _inverse_jacobian(eta: Vector) -> Matrix:
    e1, e2, e3, e4 = eta
    return np.array(
        [
            [1.0, 0.0, 0.0, 0.0],
            [0.0, 1.0, 0.0, 0.0],
            [-e4 / e1**2, e3 / e2**2, -1.0 / e2, 1.0 / e1],
            [0.0, -e3 / e2**2, 1.0 / e2, 0.0],
        ]
    )


def robot_monotonicity_bound(domain_box: Box = DOMAIN_BOX) -> float:
    """
    Smallest admissible weight ``a`` in P = diag(1, 1, a, a) for a theta box.

    Args:
        domain_box: Bounds on (l1, l2, m1, m2); l2 and m2 need positive lower bounds

    Returns:
        (l2_max + l1_max^2 / l2_min) / (4 m2_min)
    """
    (_, l1_max), (l2_min, l2_max), _, (m2_min, _) = domain_box
    if l2_min <= 0.0 or m2_min <= 0.0:
        raise DimensionError("l2 and m2 need positive lower bounds")
    return (l2_max + l1_max**2 / l2_min) / (4.0 * m2_min)


def robot_change(a: float = 1.0, rho: float = 0.05, nu: float = 2.0) -> ParameterChange:
    """
    eta = (l1, l2, l2 m2, l1 (m1 + m2)) with good map (eta1 eta3, eta2 eta3, eta3, eta4).

    P weights the (eta3, eta4) block by ``a``; positivity of P dG + dG^T P then needs
    4 a eta3 > eta1^2 + eta2^2. The default constants hold for a = 1 on DOMAIN_BOX.
    """
    return ParameterChange(
        forward=_forward,
        inverse=_inverse,
        inverse_jacobian=_inverse_jacobian,
        permutation=(1, 2, 3, 4, 0),
        selector_rows=(0, 1, 2, 3),
        P=np.diag([1.0, 1.0, a, a]),
        rho=rho,
        nu=nu,
    )


def robot_npre(a: float = 1.0, rho: float = 0.05, nu: float = 2.0) -> FactorizedNPRE:
    return FactorizedNPRE(
        map=NonlinearMap(4, 5, robot_S, robot_S_jacobian, DOMAIN_BOX),
        change=robot_change(a, rho, nu),
        n=2,
        name="robot2dof",
    )


@dataclass(frozen=True)
class TwoDofRobot:
    """Mechanics of the fully actuated two-link arm."""

    theta: tuple[float, float, float, float] = THETA_TRUE
    g: float = GRAVITY

    def __post_init__(self) -> None:
        if len(self.theta) != 4 or min(self.theta) <= 0.0:
            raise DimensionError(f"l1, l2, m1, m2 must be positive, got {self.theta}")

    @property
    def S(self) -> Vector:
        return robot_S(np.array(self.theta))

    def inertia(self, q: Vector) -> Matrix:
        return inertia_matrix(self.S, q)

    def coriolis(self, q: Vector, dq: Vector) -> Matrix:
        return coriolis_matrix(self.S, q, dq)

    def gravity(self, q: Vector) -> Vector:
        return gravity_vector(self.S, q, self.g)

    def potential(self, q: Vector) -> float:
        S = self.S
        return float(
            S[3] * self.g * (1.0 + math.sin(q[0] + q[1]))
            + S[4] * self.g * (1.0 + math.sin(q[0]))
        )

    def energy(self, q: Vector, dq: Vector) -> float:
        return float(0.5 * dq @ self.inertia(q) @ dq) + self.potential(q)

    def inertia_rate(self, q: Vector, dq: Vector) -> Matrix:
        """dM/dt along (q, dq)."""
        s2 = math.sin(q[1])
        return -self.S[1] * s2 * dq[1] * np.array([[2.0, 1.0], [1.0, 0.0]])


def inertia_matrix(S: Vector, q: Vector) -> Matrix:
    c2 = math.cos(q[1])
    off = S[2] + S[1] * c2
    return np.array([[S[0] + 2.0 * S[1] * c2, off], [off, S[2]]])


def coriolis_matrix(S: Vector, q: Vector, dq: Vector) -> Matrix:
    """Christoffel-symbol Coriolis matrix; dM/dt - 2C is skew-symmetric."""
    h = S[1] * math.sin(q[1])
    return h * np.array([[-dq[1], -(dq[0] + dq[1])], [dq[0], 0.0]])


def gravity_vector(S: Vector, q: Vector, g: float = GRAVITY) -> Vector:
    c12 = math.cos(q[0] + q[1])
    return np.array([S[3] * g * c12 + S[4] * g * math.cos(q[0]), S[3] * g * c12])


def robot_dynamics(robot: TwoDofRobot, q: Vector, dq: Vector, u: Vector) -> Vector:
    """ddq = M(q)^{-1} (u - C(q, dq) dq - grad U(q))."""
    rhs = np.asarray(u, dtype=float) - robot.coriolis(q, dq) @ dq - robot.gravity(q)
    return np.asarray(np.linalg.solve(robot.inertia(q), rhs), dtype=float)


def regressor_terms(q: Vector, dq: Vector, g: float = GRAVITY) -> tuple[Matrix, Matrix]:
    """
    Split the dynamics into d/dt[N(q, dq)] + Q(q, dq), both linear in S.

    Returns:
        Tuple (N, Q) with N S = M(q) dq and Q S = -1/2 grad(dq^T M dq) + grad U(q)
    """
    c2, s2 = math.cos(q[1]), math.sin(q[1])
    c12, c1 = math.cos(q[0] + q[1]), math.cos(q[0])
    N = np.array(
        [
            [dq[0], c2 * (2.0 * dq[0] + dq[1]), dq[1], 0.0, 0.0],
            [0.0, c2 * dq[0], dq[0] + dq[1], 0.0, 0.0],
        ]
    )
    Q = np.array(
        [
            [0.0, 0.0, 0.0, g * c12, g * c1],
            [0.0, s2 * (dq[0] ** 2 + dq[0] * dq[1]), 0.0, g * c12, 0.0],
        ]
    )
    return N, Q


@dataclass(frozen=True, eq=False)
class RobotRegressorFilters:
    """
    Filter states realizing 1/(p + lam) on the dynamics.

    ``A`` carries H(p)[Q - lam N] so that Omega = N + A, and ``xi`` carries H(p)[u].
    """

    A: Matrix
    xi: Vector
    lam: float = 1.0

    @classmethod
    def zeros(cls, lam: float = 1.0) -> "RobotRegressorFilters":
        return cls(np.zeros((2, 5)), np.zeros(2), lam)

    def as_vector(self) -> Vector:
        return np.concatenate([self.xi, self.A.ravel()])

    @classmethod
    def from_vector(cls, values: Vector, lam: float) -> "RobotRegressorFilters":
        return cls(values[2:12].reshape(2, 5).copy(), values[:2].copy(), lam)


def robot_regressor_output(
    filters: RobotRegressorFilters, q: Vector, dq: Vector, g: float = GRAVITY
) -> tuple[Vector, Matrix]:
    """Current (y, Omega) of the filtered regression y = Omega S(theta)."""
    N, _ = regressor_terms(q, dq, g)
    return filters.xi.copy(), N + filters.A


def robot_regressor_derivative(
    filters: RobotRegressorFilters, q: Vector, dq: Vector, u: Vector, g: float = GRAVITY
) -> tuple[Vector, Matrix]:
    """Time derivatives (dxi, dA) of the regressor filters."""
    N, Q = regressor_terms(q, dq, g)
    lam = filters.lam
    return -lam * filters.xi + u, -lam * filters.A + Q - lam * N


def robot_regressor_step(
    filters: RobotRegressorFilters,
    q: Vector,
    dq: Vector,
    u: Vector,
    h: float,
    g: float = GRAVITY,
) -> tuple[RobotRegressorFilters, Vector, Matrix]:
    """
    Advance the filters one RK4 step with (q, dq, u) held over the step.

    Args:
        filters: Current filter states
        q, dq: Joint positions and velocities
        u: Applied torque
        h: Step size

    Returns:
        Tuple (filters, y, Omega) after the step
    """
    def derivative(t: float, state: Vector) -> Vector:
        current = RobotRegressorFilters.from_vector(state, filters.lam)
        dxi, dA = robot_regressor_derivative(current, q, dq, u, g)
        return np.concatenate([dxi, dA.ravel()])

    advanced = RobotRegressorFilters.from_vector(
        rk4_step(derivative, filters.as_vector(), 0.0, h), filters.lam
    )
    y, omega = robot_regressor_output(advanced, q, dq, g)
    return advanced, y, omega


@dataclass(frozen=True, eq=False)
class TrackingErrors:
    q_tilde: Vector
    dq_tilde: Vector
    dq_r: Vector
    ddq_r: Vector
    s: Vector


def tracking_errors(
    q: Vector, dq: Vector, t: float, K2: Matrix, reference: Reference
) -> TrackingErrors:
    """Reference velocity dq_r = dq* - K2 q~ and sliding variable s = dq~ + K2 q~."""
    q_star, dq_star, ddq_star = reference(t)
    q_tilde = q - q_star
    dq_tilde = dq - dq_star
    return TrackingErrors(
        q_tilde=q_tilde,
        dq_tilde=dq_tilde,
        dq_r=dq_star - K2 @ q_tilde,
        ddq_r=ddq_star - K2 @ dq_tilde,
        s=dq_tilde + K2 @ q_tilde,
    )


def control_regressor(
    q: Vector, dq: Vector, dq_r: Vector, ddq_r: Vector, g: float = GRAVITY
) -> Matrix:
    """W with W S = M(q) ddq_r + C(q, dq) dq_r + grad U(q)."""
    c2, s2 = math.cos(q[1]), math.sin(q[1])
    c12, c1 = math.cos(q[0] + q[1]), math.cos(q[0])
    return np.array(
        [
            [
                ddq_r[0],
                c2 * (2.0 * ddq_r[0] + ddq_r[1])
                - s2 * (dq[1] * dq_r[0] + (dq[0] + dq[1]) * dq_r[1]),
                ddq_r[1],
                g * c12,
                g * c1,
            ],
            [
                0.0,
                c2 * ddq_r[0] + s2 * dq[0] * dq_r[0],
                ddq_r[0] + ddq_r[1],
                g * c12,
                0.0,
            ],
        ]
    )


def slotine_li_control(
    S_hat: Vector,
    q: Vector,
    dq: Vector,
    t: float,
    K1: Matrix,
    K2: Matrix,
    reference: Reference,
    g: float = GRAVITY,
) -> Vector:
    """
    Slotine-Li law u = W(q, dq, dq_r, ddq_r) S_hat - K1 s.

    Args:
        S_hat: Nominal S, either S(theta_hat) or an overparameterized estimate
        q, dq: Joint state
        t: Time
        K1, K2: Damping and sliding-surface gains
        reference: Desired trajectory t -> (q*, dq*, ddq*)
        g: Gravitational constant

    Returns:
        Joint torques
    """
    err = tracking_errors(q, dq, t, K2, reference)
    W = control_regressor(q, dq, err.dq_r, err.ddq_r, g)
    return np.asarray(W @ S_hat - K1 @ err.s, dtype=float)


def computed_torque_control(
    S_hat: Vector,
    q: Vector,
    dq: Vector,
    t: float,
    K1: Matrix,
    K2: Matrix,
    reference: Reference,
    g: float = GRAVITY,
) -> Vector:
    """u = M(q) (ddq* - K1 dq~ - K2 q~) + C(q, dq) dq + grad U(q)."""
    q_star, dq_star, ddq_star = reference(t)
    v = ddq_star - K1 @ (dq - dq_star) - K2 @ (q - q_star)
    return np.asarray(control_regressor(q, dq, dq, v, g) @ S_hat, dtype=float)


def overparam_adaptation(
    q: Vector,
    dq: Vector,
    t: float,
    K2: Matrix,
    Gamma: Matrix,
    reference: Reference,
    g: float = GRAVITY,
) -> Vector:
    """Classical gradient law dS_hat/dt = -Gamma W^T s."""
    err = tracking_errors(q, dq, t, K2, reference)
    W = control_regressor(q, dq, err.dq_r, err.ddq_r, g)
    return np.asarray(-Gamma @ W.T @ err.s, dtype=float)


def desired_trajectory(t: float) -> tuple[Vector, Vector, Vector]:
    """q*(t) = (0.4 pi sin 2t + 0.2 pi, 0.3 pi cos t + 0.3 pi) with derivatives."""
    a, b = 0.4 * math.pi, 0.3 * math.pi
    return (
        np.array([a * math.sin(2 * t) + 0.2 * math.pi, b * math.cos(t) + b]),
        np.array([2 * a * math.cos(2 * t), -b * math.sin(t)]),
        np.array([-4 * a * math.sin(2 * t), -b * math.cos(t)]),
    )


ROBOT_CONTROLLERS: dict[str, Callable[..., Vector]] = {
    "slotine-li": slotine_li_control,
    "computed-torque": computed_torque_control,
}

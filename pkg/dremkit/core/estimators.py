"""
DREM estimators, gain algebra and the overparameterized gradient baseline.
"""

import logging
import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
import scipy.linalg

from . import (
    DimensionError,
    GainTooLargeError,
    Matrix,
    NormalizationError,
    Vector,
)
from .mixing import MixedOutput
from .npre import FactorizedNPRE, ParameterChange, eval_good_map

logger = logging.getLogger(__name__)


def _lambda_max(P: Matrix) -> float:
    return float(np.max(scipy.linalg.eigvalsh(np.atleast_2d(P))))


def _require_positive_definite(name: str, A: Matrix) -> Matrix:
    A = np.atleast_2d(np.asarray(A, dtype=float))
    if A.shape[0] != A.shape[1] or not np.allclose(A, A.T):
        raise DimensionError(f"{name} must be a symmetric square matrix")
    if np.min(scipy.linalg.eigvalsh(A)) <= 0.0:
        raise DimensionError(f"{name} must be positive definite")
    return A


@dataclass(frozen=True)
class GainReport:
    """Outcome of the discrete-time gain checks."""

    sigma: float
    kappa_min: float
    interval_defined: bool
    gamma_interval: Optional[tuple[float, float]]
    gamma_in_interval: bool


def convergence_gain_interval(rho: float, nu: float, lambda_max: float) -> Optional[tuple[float, float]]:
    """
    Admissible adaptation gains for convergence under non-square-summable Delta.

    Returns None when nu > rho / lambda_max, where the interval is undefined.
    """
    if nu > rho / lambda_max:
        return None
    scale = (nu * lambda_max) ** 2
    root = math.sqrt(max(rho**2 - scale, 0.0))
    return (rho - root) / scale, (rho + root) / scale


def validate_dt_gains(
    rho: float, nu: float, P: Matrix, gamma: float, kappa: float
) -> GainReport:
    """
    Check sigma = 2 gamma rho - gamma^2 nu^2 lambda_max(P)^2 > 0 and kappa >= max{1, sigma}.

    Args:
        rho: Monotonicity constant of the good map
        nu: Lipschitz constant of the good map
        P: Monotonicity weight matrix
        gamma: Adaptation gain
        kappa: Normalization constant

    Returns:
        GainReport with sigma and the gain interval that gives convergence without square-summable Delta

    Raises:
        GainTooLargeError: sigma <= 0
        NormalizationError: kappa < max{1, sigma}
    """
    if rho <= 0.0 or nu <= 0.0:
        raise DimensionError("rho and nu must be positive")
    lam = _lambda_max(_require_positive_definite("P", P))
    sigma = 2.0 * gamma * rho - (gamma * nu * lam) ** 2
    if sigma <= 0.0:
        bound = 2.0 * rho / (nu * lam) ** 2
        raise GainTooLargeError(
            f"sigma = {sigma:.6g} <= 0: gamma = {gamma:g} must satisfy gamma < {bound:.6g}"
        )
    kappa_min = max(1.0, sigma)
    if kappa < kappa_min:
        raise NormalizationError(
            f"kappa = {kappa:g} is below max(1, sigma) = {kappa_min:.6g}"
        )
    interval = convergence_gain_interval(rho, nu, lam)
    inside = interval is not None and interval[0] <= gamma <= interval[1]
    return GainReport(sigma, kappa_min, interval is not None, interval, inside)


@dataclass(frozen=True, eq=False)
class CTDremEstimator:
    """
    Continuous-time DREM estimator.

    ``kappa > 0`` normalizes the scalar regressor, Delta / (1 + kappa Delta^2), which bounds
    the adaptation rate by Gamma / kappa; ``kappa = 0`` is the plain law.
    """

    eta_hat: Vector
    Gamma: Matrix
    P: Matrix
    kappa: float = 0.0

    def __post_init__(self) -> None:
        object.__setattr__(self, "Gamma", _require_positive_definite("Gamma", self.Gamma))
        object.__setattr__(self, "eta_hat", np.asarray(self.eta_hat, dtype=float))
        if self.Gamma.shape[0] != self.eta_hat.size:
            raise DimensionError("Gamma and eta_hat dimensions differ")
        if self.kappa < 0.0:
            raise DimensionError(f"kappa must be non-negative, got {self.kappa}")


@dataclass(frozen=True, eq=False)
class DTDremEstimator:
    eta_hat: Vector
    gamma: float
    kappa: float
    P: Matrix
    sigma: float

    @classmethod
    def from_change(
        cls,
        eta_hat: Vector,
        gamma: float,
        kappa: float,
        change: ParameterChange,
        strict: bool = True,
    ) -> "DTDremEstimator":
        """
        Build an estimator after validating the gains against the certified rho and nu.

        With ``strict=False`` a kappa below max{1, sigma} is accepted with a warning.
        """
        try:
            sigma = validate_dt_gains(change.rho, change.nu, change.P, gamma, kappa).sigma
        except NormalizationError as e:
            if strict:
                raise
            logger.warning(f"Running with unvalidated normalization: {e}")
            sigma = 2.0 * gamma * change.rho - (gamma * change.nu * change.lambda_max_P) ** 2
        return cls(np.asarray(eta_hat, dtype=float), gamma, kappa, change.P, sigma)


@dataclass(frozen=True, eq=False)
class GradientBaseline:
    """Normalized gradient estimate of the overparameterized vector S(theta)."""

    S_hat: Vector
    gamma: float

    def __post_init__(self) -> None:
        if self.gamma <= 0.0:
            raise DimensionError("gamma must be positive")


def ct_estimator_derivative(
    est: CTDremEstimator, mixed: MixedOutput, npre: FactorizedNPRE
) -> Vector:
    """eta_hat' = Gamma P delta / (1 + kappa delta^2) (script_y - delta G(eta_hat))."""
    if mixed.delta == 0.0:
        return np.zeros_like(est.eta_hat)
    delta = mixed.delta
    error = mixed.script_y - delta * eval_good_map(npre, est.eta_hat)
    gain = delta / (1.0 + est.kappa * delta**2)
    return np.asarray(est.Gamma @ est.P @ (gain * error), dtype=float)


def dt_estimator_step(
    est: DTDremEstimator, mixed: MixedOutput, npre: FactorizedNPRE
) -> Vector:
    """
    One normalized update of the discrete-time DREM estimator.

    Args:
        est: Estimator with validated gains
        mixed: Scalar regressions at sample k
        npre: Supplies the good map

    Returns:
        The estimate at sample k+1
    """
    if mixed.delta == 0.0:
        return est.eta_hat.copy()
    delta = mixed.delta
    gain = est.gamma * delta / (1.0 + est.kappa * delta**2)
    error = mixed.script_y - delta * eval_good_map(npre, est.eta_hat)
    return np.asarray(est.eta_hat + gain * (est.P @ error), dtype=float)


def dt_gradient_baseline_step(base: GradientBaseline, omega: Matrix, y: Vector) -> Vector:
    """S_hat(k) = S_hat(k-1) + Omega^T (gamma I + Omega Omega^T)^{-1} (y - Omega S_hat(k-1))."""
    omega = np.atleast_2d(np.asarray(omega, dtype=float))
    y = np.atleast_1d(np.asarray(y, dtype=float))
    if omega.shape != (y.size, base.S_hat.size):
        raise DimensionError(f"Omega {omega.shape} does not match y {y.shape}")
    innovation = y - omega @ base.S_hat
    weights = np.linalg.solve(base.gamma * np.eye(y.size) + omega @ omega.T, innovation)
    return np.asarray(base.S_hat + omega.T @ weights, dtype=float)


@dataclass(frozen=True)
class ExcitationTracker:
    """
    Running excitation measures of Delta.

    Continuous time keeps the integral of Delta^2. Discrete time keeps the sum of
    Delta^2, the sum of the normalized Delta^2/(1 + kappa Delta^2) and the product
    of (1 + (kappa - sigma) Delta^2)/(1 + kappa Delta^2).
    """

    integral_delta_sq: float = 0.0
    sum_delta_sq: float = 0.0
    product: float = 1.0
    last_delta: float = 0.0
    kappa: Optional[float] = field(default=None, repr=False)
    sigma: Optional[float] = field(default=None, repr=False)

    @classmethod
    def continuous(cls) -> "ExcitationTracker":
        return cls()

    @classmethod
    def discrete(cls, kappa: float, sigma: float) -> "ExcitationTracker":
        return cls(kappa=kappa, sigma=sigma)

    @property
    def is_discrete(self) -> bool:
        return self.kappa is not None


def track_excitation(
    tracker: ExcitationTracker, delta: float, dt: Optional[float] = None
) -> ExcitationTracker:
    """
    Accumulate one sample of Delta.

    Args:
        tracker: Current accumulators
        delta: Mixing determinant at this sample
        dt: Integrator step for continuous time, None for discrete time

    Returns:
        Updated tracker
    """
    delta_sq = delta * delta
    if dt is not None:
        if tracker.is_discrete:
            raise ValueError("discrete-time tracker updated with a step size")
        return ExcitationTracker(
            integral_delta_sq=tracker.integral_delta_sq + delta_sq * dt,
            sum_delta_sq=tracker.sum_delta_sq + delta_sq,
            last_delta=delta,
        )
    if tracker.kappa is None or tracker.sigma is None:
        raise ValueError("continuous-time tracker updated without a step size")
    kappa, sigma = tracker.kappa, tracker.sigma
    return ExcitationTracker(
        integral_delta_sq=tracker.integral_delta_sq + delta_sq / (1.0 + kappa * delta_sq),
        sum_delta_sq=tracker.sum_delta_sq + delta_sq,
        product=tracker.product * (1.0 + (kappa - sigma) * delta_sq) / (1.0 + kappa * delta_sq),
        last_delta=delta,
        kappa=kappa,
        sigma=sigma,
    )

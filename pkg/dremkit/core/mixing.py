"""
Dynamic regressor extension and mixing.

The extension filters turn ``y = Omega W`` (n rows) into the square system
``Y = Phi W``; mixing with ``adj(Phi)`` then yields q decoupled scalar regressions
``script_y_i = Delta G_i(eta)`` with ``Delta = det(Phi)``.
"""

import itertools
import warnings
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from . import DimensionError, Matrix, Vector
from .npre import ParameterChange

COFACTOR_MAX_SIZE = 4
SINGULARITY_THRESHOLD = 1e-12
# Relative |det(Phi)| below which the stored system cannot arbitrate a new row
RANK_THRESHOLD = 1e-8


@dataclass(frozen=True, eq=False)
class CTExtensionState:
    """Continuous-time filter states Y' = -lam Y + Omega^T y, Phi' = -lam Phi + Omega^T Omega."""

    Y: Vector
    Phi: Matrix
    lam: float

    def __post_init__(self) -> None:
        if self.lam <= 0.0:
            raise DimensionError(f"filter pole lambda must be positive, got {self.lam}")
        _check_square(self.Y, self.Phi)

    @classmethod
    def zeros(cls, p: int, lam: float) -> "CTExtensionState":
        return cls(np.zeros(p), np.zeros((p, p)), lam)

    @property
    def p(self) -> int:
        return int(self.Y.size)

    def as_vector(self) -> Vector:
        """Flatten (Y, Phi) for the integrator."""
        return np.concatenate([self.Y, self.Phi.ravel()])

    @classmethod
    def from_vector(cls, values: Vector, p: int, lam: float) -> "CTExtensionState":
        return cls(values[:p].copy(), values[p : p + p * p].reshape(p, p).copy(), lam)


@dataclass(frozen=True, eq=False)
class DTExtensionState:
    """Discrete-time filter states with pole -alpha."""

    Y: Vector
    Phi: Matrix
    alpha: float

    def __post_init__(self) -> None:
        if not 0.0 < self.alpha < 1.0:
            raise DimensionError(f"alpha must lie in (0, 1), got {self.alpha}")
        _check_square(self.Y, self.Phi)

    @classmethod
    def zeros(cls, p: int, alpha: float) -> "DTExtensionState":
        return cls(np.zeros(p), np.zeros((p, p)), alpha)

    @property
    def p(self) -> int:
        return int(self.Y.size)


ExtensionState = CTExtensionState | DTExtensionState


@dataclass(frozen=True)
class MixedOutput:
    """q scalar regressions script_y = delta G(eta)."""

    script_y: Vector = field(repr=False)
    delta: float


def _check_square(Y: Vector, Phi: Matrix) -> None:
    if Y.ndim != 1 or Phi.shape != (Y.size, Y.size):
        raise DimensionError(f"Y {Y.shape} and Phi {Phi.shape} are inconsistent")


def _as_rows(omega: Matrix, y: Vector, p: int) -> tuple[Matrix, Vector]:
    omega = np.atleast_2d(np.asarray(omega, dtype=float))
    y = np.atleast_1d(np.asarray(y, dtype=float))
    if omega.shape[1] != p or omega.shape[0] != y.size:
        raise DimensionError(
            f"Omega {omega.shape} and y {y.shape} do not match p={p}"
        )
    return omega, y


def ct_extension_derivative(
    state: CTExtensionState, omega: Matrix, y: Vector
) -> tuple[Vector, Matrix]:
    """
    Right-hand side of the continuous-time extension filters.

    Args:
        state: Current (Y, Phi)
        omega: Regressor, shape (n, p)
        y: Measured output, shape (n,)

    Returns:
        Tuple (dY, dPhi)
    """
    omega, y = _as_rows(omega, y, state.p)
    dY = -state.lam * state.Y + omega.T @ y
    dPhi = -state.lam * state.Phi + omega.T @ omega
    return dY, dPhi


def dt_extension_step(
    state: DTExtensionState, omega_prev: Matrix, y_prev: Vector
) -> DTExtensionState:
    """Y(k) = -alpha Y(k-1) + Omega^T(k-1) y(k-1), and likewise for Phi."""
    omega, y = _as_rows(omega_prev, y_prev, state.p)
    return DTExtensionState(
        -state.alpha * state.Y + omega.T @ y,
        -state.alpha * state.Phi + omega.T @ omega,
        state.alpha,
    )


def cofactor_determinant(A: Matrix) -> float:
    """Determinant by Laplace expansion along the first row."""
    n = A.shape[0]
    if n == 1:
        return float(A[0, 0])
    if n == 2:
        return float(A[0, 0] * A[1, 1] - A[0, 1] * A[1, 0])
    total = 0.0
    for j in range(n):
        minor = np.delete(A[1:], j, axis=1)
        total += (-1.0) ** j * A[0, j] * cofactor_determinant(minor)
    return total


def lu_determinant(A: Matrix) -> float:
    """Determinant from the pivoted LU factors."""
    with warnings.catch_warnings():
        # exactly singular matrices are legitimate input here
        warnings.simplefilter("ignore", scipy.linalg.LinAlgWarning)
        lu, piv = scipy.linalg.lu_factor(A, check_finite=False)
    swaps = int(np.count_nonzero(piv != np.arange(piv.size)))
    sign = -1.0 if swaps % 2 else 1.0
    return sign * float(np.prod(np.diag(lu)))


def determinant(A: Matrix) -> float:
    A = _square(A)
    if A.shape[0] == 0:
        return 1.0
    if A.shape[0] <= COFACTOR_MAX_SIZE:
        return cofactor_determinant(A)
    return lu_determinant(A)


def _square(A: Matrix) -> Matrix:
    A = np.asarray(A, dtype=float)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise DimensionError(f"expected a square matrix, got shape {A.shape}")
    return A


def _cofactor_adjugate(A: Matrix) -> Matrix:
    n = A.shape[0]
    if n == 1:
        return np.ones((1, 1))
    cofactors = np.empty((n, n))
    for i, j in itertools.product(range(n), range(n)):
        minor = np.delete(np.delete(A, i, axis=0), j, axis=1)
        cofactors[i, j] = (-1.0) ** (i + j) * determinant(minor)
    return cofactors.T


def adjugate(A: Matrix) -> Matrix:
    """
    Classical adjugate, defined for singular matrices as well.

    Small matrices use cofactors. Larger ones use det(A) A^{-1} from one LU
    factorization, falling back to cofactors when A is numerically singular.

    Args:
        A: Square matrix

    Returns:
        adj(A), with adj(A) A = det(A) I
    """
    A = _square(A)
    n = A.shape[0]
    if n <= COFACTOR_MAX_SIZE:
        return _cofactor_adjugate(A)
    scale = max(1.0, float(np.max(np.sum(np.abs(A), axis=1)))) ** n
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", scipy.linalg.LinAlgWarning)
        lu, piv = scipy.linalg.lu_factor(A, check_finite=False)
    swaps = int(np.count_nonzero(piv != np.arange(n)))
    det = (-1.0 if swaps % 2 else 1.0) * float(np.prod(np.diag(lu)))
    if abs(det) < SINGULARITY_THRESHOLD * scale:
        return _cofactor_adjugate(A)
    return det * scipy.linalg.lu_solve((lu, piv), np.eye(n), check_finite=False)


def mix(state: ExtensionState, change: ParameterChange) -> MixedOutput:
    """
    Mix the extended regression: script_y = C adj(Phi) Y, delta = det(Phi).

    Args:
        state: CT or DT extension state
        change: Supplies the permutation and selector C

    Returns:
        MixedOutput with the q scalar regressions
    """
    if state.p != change.p:
        raise DimensionError(f"extension has p={state.p}, change expects {change.p}")
    return MixedOutput(
        script_y=change.select(adjugate(state.Phi) @ state.Y),
        delta=determinant(state.Phi),
    )


def regression_inconsistency(state: ExtensionState, omega: Matrix, y: Vector) -> float:
    """
    Relative residual of a new row (Omega, y) against the stored system Y = Phi W.

    With ``adj(Phi) Y = Delta W`` the residual is ``|Delta y - Omega adj(Phi) Y|``, scaled
    by ``|Delta| |y| + |Omega| |adj(Phi) Y|``. Rows generated by the same W score at
    rounding level; a changed W scores O(1).

    Returns:
        The relative residual, or 0.0 while Phi is numerically singular
    """
    omega, y = _as_rows(omega, y, state.p)
    size = float(np.linalg.norm(state.Phi)) ** state.p
    delta = determinant(state.Phi)
    if size == 0.0 or abs(delta) < RANK_THRESHOLD * size:
        return 0.0
    delta_W = adjugate(state.Phi) @ state.Y
    denominator = abs(delta) * float(np.linalg.norm(y)) + float(np.linalg.norm(omega)) * float(
        np.linalg.norm(delta_W)
    )
    if denominator == 0.0:
        return 0.0
    return float(np.linalg.norm(delta * y - omega @ delta_W)) / denominator

"""
Factorizable nonlinearly parameterized regression equations.

An NPRE reads ``y = Omega S(theta)`` with measurable ``(y, Omega)`` and a known map
``S: R^q -> R^p``, ``p > q``. A :class:`ParameterChange` ``eta = D(theta)`` together with a
row permutation and selection turns ``S`` into a "good" map ``G(eta) = C W(eta)``,
``W(eta) = S(D^I(eta))``, that is strongly P-monotone. Monotonicity and the Lipschitz
bound are certified numerically by sampling.
"""

import logging
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
import scipy.linalg

from . import (
    DimensionError,
    JacobianMap,
    Matrix,
    SingularCoordinateError,
    Vector,
    VectorMap,
)

logger = logging.getLogger(__name__)

DEFAULT_SAMPLE_RANGE = (-10.0, 10.0)
CERTIFICATE_TOLERANCE = 1e-12

Box = tuple[tuple[float, float], ...]


def _frozen(array: Matrix) -> Matrix:
    out = np.array(array, dtype=float)
    out.setflags(write=False)
    return out


@dataclass(frozen=True, eq=False)
class NonlinearMap:
    """The map S: R^q -> R^p with its analytic Jacobian."""

    q: int
    p: int
    evaluate: VectorMap
    jacobian: JacobianMap
    domain_box: Box

    def __post_init__(self) -> None:
        if self.p <= self.q:
            raise DimensionError(f"need p > q, got p={self.p}, q={self.q}")
        if len(self.domain_box) != self.q:
            raise DimensionError(
                f"domain_box has {len(self.domain_box)} axes, expected {self.q}"
            )
        for lower, upper in self.domain_box:
            if not lower < upper:
                raise DimensionError(f"empty domain interval [{lower}, {upper}]")

    def __call__(self, theta: Vector) -> Vector:
        return np.asarray(self.evaluate(np.asarray(theta, dtype=float)), dtype=float)

    def sample_domain(
        self,
        rng: np.random.Generator,
        count: int,
        default_range: tuple[float, float] = DEFAULT_SAMPLE_RANGE,
    ) -> Matrix:
        """
        Draw ``count`` points uniformly from the domain box.

        Args:
            rng: Random generator
            count: Number of points
            default_range: Interval used for unbounded axes

        Returns:
            Array of shape (count, q)
        """
        span = default_range[1] - default_range[0]
        lows = np.empty(self.q)
        highs = np.empty(self.q)
        for i, (lower, upper) in enumerate(self.domain_box):
            lows[i] = lower if np.isfinite(lower) else default_range[0]
            highs[i] = upper if np.isfinite(upper) else default_range[1]
            if lows[i] >= highs[i]:
                # half-open axis lying outside the default range
                if np.isfinite(lower):
                    highs[i] = lower + span
                else:
                    lows[i] = upper - span
        return rng.uniform(lows, highs, size=(count, self.q))


@dataclass(frozen=True, eq=False)
class ParameterChange:
    """
    Monotonizability certificate: D, D^I, T, C, P, rho and nu.

    ``permutation`` lists, for each row of ``T W``, the index of the ``W`` component it
    takes; ``selector_rows`` are the rows of ``T W`` kept by ``C``.
    """

    forward: VectorMap
    inverse: VectorMap
    inverse_jacobian: JacobianMap
    permutation: tuple[int, ...]
    selector_rows: tuple[int, ...]
    P: Matrix
    rho: float
    nu: float

    def __post_init__(self) -> None:
        p = len(self.permutation)
        if sorted(self.permutation) != list(range(p)):
            raise DimensionError(f"permutation {self.permutation} is not a bijection")
        if len(set(self.selector_rows)) != len(self.selector_rows) or any(
            not 0 <= r < p for r in self.selector_rows
        ):
            raise DimensionError(f"invalid selector rows {self.selector_rows}")
        P = _frozen(self.P)
        q = len(self.selector_rows)
        if P.shape != (q, q):
            raise DimensionError(f"P must be {q}x{q}, got {P.shape}")
        if not np.allclose(P, P.T):
            raise DimensionError("P must be symmetric")
        if np.min(scipy.linalg.eigvalsh(P)) <= 0.0:
            raise DimensionError("P must be positive definite")
        if self.rho <= 0.0 or self.nu <= 0.0:
            raise DimensionError("rho and nu must be positive")
        object.__setattr__(self, "P", P)

    @property
    def q(self) -> int:
        return len(self.selector_rows)

    @property
    def p(self) -> int:
        return len(self.permutation)

    @property
    def lambda_max_P(self) -> float:
        return float(np.max(scipy.linalg.eigvalsh(self.P)))

    def selection_matrix(self) -> Matrix:
        """Return C = [I_q | 0] T as a dense q x p matrix."""
        C = np.zeros((self.q, self.p))
        for row, r in enumerate(self.selector_rows):
            C[row, self.permutation[r]] = 1.0
        return C

    def select(self, w: Vector) -> Vector:
        """Apply C to a p-vector (or to the rows of a p x k matrix)."""
        index = [self.permutation[r] for r in self.selector_rows]
        return np.asarray(w)[index]


@dataclass(frozen=True, eq=False)
class FactorizedNPRE:
    """y = Omega S(theta) with output dimension n and a monotonizing change."""

    map: NonlinearMap
    change: ParameterChange
    n: int
    name: str = ""

    def __post_init__(self) -> None:
        if self.change.p != self.map.p:
            raise DimensionError(
                f"change acts on p={self.change.p}, map has p={self.map.p}"
            )
        if self.change.q != self.map.q:
            raise DimensionError(
                f"change selects q={self.change.q}, map has q={self.map.q}"
            )
        if self.n < 1:
            raise DimensionError("output dimension n must be positive")

    @property
    def p(self) -> int:
        return self.map.p

    @property
    def q(self) -> int:
        return self.map.q

    def to_eta(self, theta: Vector) -> Vector:
        return np.asarray(self.change.forward(np.asarray(theta, dtype=float)), dtype=float)

    def to_theta(self, eta: Vector) -> Vector:
        """D^I(eta); raises SingularCoordinateError on a singular coordinate."""
        theta = np.asarray(self.change.inverse(np.asarray(eta, dtype=float)), dtype=float)
        bad = np.flatnonzero(~np.isfinite(theta))
        if bad.size:
            raise SingularCoordinateError(f"theta[{bad[0]}]", float(theta[bad[0]]))
        return theta

    def transformed_map(self, eta: Vector) -> Vector:
        """W(eta) = S(D^I(eta))."""
        return self.map(self.to_theta(eta))

    def check_dimensions(self, omega: Matrix, y: Vector) -> None:
        omega = np.atleast_2d(omega)
        if omega.shape != (self.n, self.p):
            raise DimensionError(f"Omega must be {self.n}x{self.p}, got {omega.shape}")
        if np.size(y) != self.n:
            raise DimensionError(f"y must have {self.n} entries, got {np.size(y)}")


@dataclass(frozen=True)
class CertificateReport:
    """Numerical witness for a monotonicity or Lipschitz condition."""

    min_eigenvalue_found: float
    worst_point: Vector = field(repr=False)
    samples_checked: int
    passed: bool
    bound: float = 0.0
    failure: Optional[str] = None


def eval_good_map(npre: FactorizedNPRE, eta: Vector) -> Vector:
    """
    Evaluate the good map G(eta) = C S(D^I(eta)).

    Args:
        npre: The factorized regression
        eta: Transformed parameters, shape (q,)

    Returns:
        The q selected components of W(eta)
    """
    eta = np.asarray(eta, dtype=float)
    if eta.shape != (npre.q,):
        raise DimensionError(f"eta must have shape ({npre.q},), got {eta.shape}")
    return npre.change.select(npre.transformed_map(eta))


def good_map_jacobian(npre: FactorizedNPRE, eta: Vector) -> Matrix:
    """Analytic Jacobian of G: C dS(D^I(eta)) dD^I(eta)."""
    theta = npre.to_theta(eta)
    dS = np.asarray(npre.map.jacobian(theta), dtype=float)
    dDi = np.asarray(npre.change.inverse_jacobian(np.asarray(eta, dtype=float)), dtype=float)
    if not np.all(np.isfinite(dDi)):
        raise SingularCoordinateError("jacobian", float("nan"), "inverse Jacobian not finite")
    return npre.change.select(dS) @ dDi


def demidovich_matrix(npre: FactorizedNPRE, eta: Vector) -> Matrix:
    """P dG(eta) + dG(eta)^T P."""
    J = good_map_jacobian(npre, eta)
    P = npre.change.P
    return P @ J + J.T @ P


def finite_difference_jacobian(f: VectorMap, x: Vector, step: float = 1e-6) -> Matrix:
    """Central finite-difference Jacobian of ``f`` at ``x``."""
    x = np.asarray(x, dtype=float)
    columns = []
    for i in range(x.size):
        h = step * max(1.0, abs(x[i]))
        e = np.zeros_like(x)
        e[i] = h
        columns.append((np.asarray(f(x + e)) - np.asarray(f(x - e))) / (2.0 * h))
    return np.column_stack(columns)


def jacobian_mismatch(npre: FactorizedNPRE, count: int, seed: int) -> float:
    """
    Largest relative gap between the analytic and finite-difference Jacobians of S and G.

    Points are drawn from the domain box of the map.
    """
    rng = np.random.default_rng(seed)
    worst = 0.0
    for theta in npre.map.sample_domain(rng, count):
        for analytic, numeric in (
            (npre.map.jacobian(theta), finite_difference_jacobian(npre.map.evaluate, theta)),
            (
                good_map_jacobian(npre, npre.to_eta(theta)),
                finite_difference_jacobian(
                    lambda e: eval_good_map(npre, e), npre.to_eta(theta)
                ),
            ),
        ):
            analytic = np.asarray(analytic, dtype=float)
            scale = max(1.0, float(np.max(np.abs(analytic))))
            worst = max(worst, float(np.max(np.abs(analytic - numeric))) / scale)
    return worst


def _sample_eta(
    npre: FactorizedNPRE, rng: np.random.Generator, count: int, default_range: tuple[float, float]
) -> Matrix:
    thetas = npre.map.sample_domain(rng, count, default_range)
    return np.array([npre.to_eta(theta) for theta in thetas])


def check_demidovich(
    npre: FactorizedNPRE,
    sample_count: int,
    seed: int,
    default_range: tuple[float, float] = DEFAULT_SAMPLE_RANGE,
) -> CertificateReport:
    """
    Certify P dG + dG^T P >= rho I on samples of D(domain_box).

    Args:
        npre: The factorized regression
        sample_count: Number of sampled points (>= 1)
        seed: Seed of the sampling generator
        default_range: Sampling interval for unbounded axes

    Returns:
        CertificateReport with the smallest eigenvalue found and where
    """
    if sample_count < 1:
        raise ValueError("sample_count must be at least 1")
    rng = np.random.default_rng(seed)
    rho = npre.change.rho
    worst_value = np.inf
    worst_point = np.full(npre.q, np.nan)
    for count, eta in enumerate(_sample_eta(npre, rng, sample_count, default_range), start=1):
        try:
            value = float(np.min(scipy.linalg.eigvalsh(demidovich_matrix(npre, eta))))
        except (SingularCoordinateError, np.linalg.LinAlgError) as e:
            logger.warning(f"Demidovich check failed at eta={eta}: {e}")
            return CertificateReport(np.nan, eta, count, False, rho, str(e))
        if value < worst_value:
            worst_value, worst_point = value, eta
    passed = worst_value >= rho - CERTIFICATE_TOLERANCE * max(1.0, rho)
    return CertificateReport(worst_value, worst_point, sample_count, passed, rho)


def _sample_pairs(
    npre: FactorizedNPRE, pair_count: int, seed: int, default_range: tuple[float, float]
) -> list[tuple[Vector, Vector]]:
    if pair_count < 1:
        raise ValueError("pair_count must be at least 1")
    rng = np.random.default_rng(seed)
    pairs = []
    while len(pairs) < pair_count:
        a, b = _sample_eta(npre, rng, 2, default_range)
        if np.any(a != b):
            pairs.append((a, b))
    return pairs


def check_strong_monotonicity(
    npre: FactorizedNPRE,
    pair_count: int,
    seed: int,
    default_range: tuple[float, float] = DEFAULT_SAMPLE_RANGE,
) -> CertificateReport:
    """Certify (a-b)^T P [G(a)-G(b)] >= rho |a-b|^2 on sampled pairs; reports the minimal ratio."""
    P = npre.change.P
    rho = npre.change.rho
    worst_ratio = np.inf
    worst_point = np.full(npre.q, np.nan)
    for count, (a, b) in enumerate(_sample_pairs(npre, pair_count, seed, default_range), start=1):
        try:
            dG = eval_good_map(npre, a) - eval_good_map(npre, b)
        except SingularCoordinateError as e:
            return CertificateReport(np.nan, a, count, False, rho, str(e))
        d = a - b
        ratio = float(d @ (P @ dG)) / float(d @ d)
        if ratio < worst_ratio:
            worst_ratio, worst_point = ratio, a
    passed = worst_ratio >= rho - CERTIFICATE_TOLERANCE * max(1.0, rho)
    return CertificateReport(worst_ratio, worst_point, pair_count, passed, rho)


def check_lipschitz(
    npre: FactorizedNPRE,
    pair_count: int,
    seed: int,
    default_range: tuple[float, float] = DEFAULT_SAMPLE_RANGE,
) -> CertificateReport:
    """
    Certify |G(a)-G(b)| <= nu |a-b| on sampled pairs.

    The report's ``min_eigenvalue_found`` field carries the maximal ratio found.
    """
    nu = npre.change.nu
    worst_ratio = -np.inf
    worst_point = np.full(npre.q, np.nan)
    for count, (a, b) in enumerate(_sample_pairs(npre, pair_count, seed, default_range), start=1):
        try:
            dG = eval_good_map(npre, a) - eval_good_map(npre, b)
        except SingularCoordinateError as e:
            return CertificateReport(np.nan, a, count, False, nu, str(e))
        ratio = float(np.linalg.norm(dG) / np.linalg.norm(a - b))
        if ratio > worst_ratio:
            worst_ratio, worst_point = ratio, a
    passed = worst_ratio <= nu + CERTIFICATE_TOLERANCE * max(1.0, nu)
    return CertificateReport(worst_ratio, worst_point, pair_count, passed, nu)


def nominal_theta(
    npre: FactorizedNPRE, eta_hat: Vector, previous: Optional[Vector]
) -> tuple[Vector, bool]:
    """
    theta_hat = D^I(eta_hat), holding ``previous`` when the inverse is singular.

    Returns:
        Tuple (theta_hat, held)
    """
    try:
        return npre.to_theta(eta_hat), False
    except SingularCoordinateError as e:
        if previous is None:
            raise
        logger.debug(f"Holding previous estimate: {e}")
        return previous, True

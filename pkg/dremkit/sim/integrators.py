"""
Fixed-step integration.
"""

from typing import Iterator

import numpy as np

from dremkit.core import DerivativeFunction, IntegrationError, Vector


def _checked(value: Vector, step: int, t: float, stage: str) -> Vector:
    value = np.asarray(value, dtype=float)
    if not np.all(np.isfinite(value)):
        bad = int(np.flatnonzero(~np.isfinite(value))[0])
        raise IntegrationError(step, t, f"{stage} has non-finite component {bad}")
    return value


def rk4_step(
    f: DerivativeFunction, state: Vector, t: float, h: float, step: int = 0
) -> Vector:
    """
    Advance ``state`` by one classical Runge-Kutta step.

    Args:
        f: Right-hand side f(t, state)
        state: State at time t
        t: Current time
        h: Step size (> 0)
        step: Step index, only used in error reports

    Returns:
        State at time t + h

    Raises:
        IntegrationError: A stage derivative or the new state is not finite
    """
    if h <= 0.0:
        raise ValueError(f"step size must be positive, got {h}")
    k1 = _checked(f(t, state), step, t, "stage 1")
    k2 = _checked(f(t + h / 2, state + h / 2 * k1), step, t, "stage 2")
    k3 = _checked(f(t + h / 2, state + h / 2 * k2), step, t, "stage 3")
    k4 = _checked(f(t + h, state + h * k3), step, t, "stage 4")
    return _checked(state + h / 6 * (k1 + 2 * k2 + 2 * k3 + k4), step, t + h, "state")


def integrate(
    f: DerivativeFunction, state: Vector, t0: float, h: float, steps: int
) -> Iterator[tuple[int, float, Vector]]:
    """
    Yield (k, t_k, x_k) for k = 0..steps on the grid t_k = t0 + k h.

    Times are computed from the index, so long runs do not accumulate drift.
    """
    current = np.asarray(state, dtype=float)
    yield 0, t0, current
    for k in range(steps):
        current = rk4_step(f, current, t0 + k * h, h, step=k)
        yield k + 1, t0 + (k + 1) * h, current

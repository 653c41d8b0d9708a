"""
Test configuration and shared fixtures for dremkit.
"""

import tempfile
from pathlib import Path
from typing import Any, Callable, Generator
import pytest
import os
import sys

import numpy as np

sys.path.insert(0, os.path.abspath(os.path.join(os.path.dirname(__file__), "..")))

from dremkit.core.npre import FactorizedNPRE, NonlinearMap, ParameterChange  # noqa: E402
from dremkit.sim.scenarios import Scenario, get_scenario  # noqa: E402


@pytest.fixture
def temp_dir() -> Generator[Path, Any, None]:
    """Provide a temporary directory that's cleaned up after the test."""
    with tempfile.TemporaryDirectory() as tmpdir:
        yield Path(tmpdir)


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(1234)


def _identity(x: np.ndarray) -> np.ndarray:
    return np.array(x, dtype=float)


def scaled_npre(scale: float, rho: float, nu: float = 1.0) -> FactorizedNPRE:
    """Scalar regression y = omega1 scale theta + omega2 theta^2, so G(eta) = scale eta."""
    change = ParameterChange(
        forward=_identity,
        inverse=_identity,
        inverse_jacobian=lambda eta: np.eye(1),
        permutation=(0, 1),
        selector_rows=(0,),
        P=np.eye(1),
        rho=rho,
        nu=nu,
    )
    nonlinear = NonlinearMap(
        q=1,
        p=2,
        evaluate=lambda th: np.array([scale * th[0], th[0] ** 2]),
        jacobian=lambda th: np.array([[scale], [2.0 * th[0]]]),
        domain_box=((-2.0, 2.0),),
    )
    return FactorizedNPRE(nonlinear, change, n=1, name=f"scaled-{scale:g}")


@pytest.fixture
def make_scaled_npre() -> Callable[..., FactorizedNPRE]:
    """Factory for one-parameter regressions with a linear good map."""
    return scaled_npre


@pytest.fixture
def scenario_with() -> Callable[..., Scenario]:
    """Registered scenario with keyword overrides, e.g. ``scenario_with("solar", horizon=3)``."""

    def build(name: str, **overrides: Any) -> Scenario:
        return get_scenario(name).with_overrides(overrides)

    return build

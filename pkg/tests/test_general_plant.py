"""
Tests for general plants x' = F(x, u) + R(x) S(theta) and their regression filter.
"""

import numpy as np
import pytest

from dremkit.core import DimensionError
from dremkit.plants.appc import indirect_npre
from dremkit.plants.general import (
    GeneralCTPlant,
    PlantFilterState,
    general_plant_filter_derivative,
    scalar_tracking_plant,
)
from dremkit.sim.engine import simulate_general_plant


def test_plant_dimension_must_match_regression():
    with pytest.raises(DimensionError):
        GeneralCTPlant(
            n=2,
            m=1,
            F=lambda x, u: np.zeros(2),
            R=lambda x: np.zeros((2, 2)),
            npre=indirect_npre(),
            beta=lambda x, th, t: np.zeros(1),
        )


def test_filter_rejects_non_positive_pole():
    with pytest.raises(DimensionError):
        PlantFilterState(np.zeros(1), np.zeros((1, 2)), lam=0.0)


def test_matched_filter_starts_on_the_regression():
    state = PlantFilterState.matched(np.array([0.3]), p=2, lam=1.5)
    np.testing.assert_array_equal(state.output(np.array([0.3])), [0.0])
    np.testing.assert_array_equal(state.Omega, np.zeros((1, 2)))


def test_regression_error_decays_at_filter_rate():
    plant = scalar_tracking_plant()
    theta = np.array([0.6])
    S = plant.npre.map(theta)
    x = np.array([0.8])
    u = np.array([0.2])
    state = PlantFilterState(np.array([0.1]), np.array([[0.3, -0.2]]), lam=2.0)
    dz, dOmega, y = general_plant_filter_derivative(state, x, u, plant)
    de = dz + plant.vector_field(x, u, theta) - dOmega @ S
    np.testing.assert_allclose(de, -2.0 * (y - state.Omega @ S), atol=1e-12)


def test_filter_state_vector_round_trip():
    state = PlantFilterState(np.array([1.0, 2.0]), np.arange(6.0).reshape(2, 3), lam=1.0)
    back = PlantFilterState.from_vector(state.as_vector(), 2, 3, 1.0)
    np.testing.assert_array_equal(back.z, state.z)
    np.testing.assert_array_equal(back.Omega, state.Omega)


def test_closed_loop_estimate_error_never_increases():
    plant = scalar_tracking_plant()
    theta = np.array([0.8])
    trace = simulate_general_plant(
        plant, theta, np.array([0.5]), np.array([0.2]), 5.0 * np.eye(1), horizon=5.0, h=1e-2
    )
    assert len(trace) == 501
    errors = trace.column("eta_error")
    assert np.all(np.diff(errors) <= 1e-9)
    assert errors[-1] <= errors[0]
    omega = trace.column("Omega")
    y = trace.column("y")
    np.testing.assert_allclose(y, omega @ plant.npre.map(theta), atol=1e-7)
    assert not np.any(trace.column("singular"))


def test_known_parameter_loop_tracks_reference():
    plant = scalar_tracking_plant(gain=2.0)
    trace = simulate_general_plant(
        plant, np.array([0.5]), np.array([1.0]), np.array([0.0]), np.eye(1), horizon=6.0, h=1e-2, adapt=False
    )
    t = trace.column("t")
    x = trace.column("x")
    # tracking error decays like exp(-2 t)
    assert abs(x[-1] - np.sin(t[-1])) < 1e-4


def test_halving_the_step_shrinks_the_change_in_the_final_estimate():
    plant = scalar_tracking_plant()
    finals = [
        simulate_general_plant(
            plant, np.array([0.8]), np.array([0.5]), np.array([0.2]), 5.0 * np.eye(1), horizon=2.0, h=h
        ).last("eta_hat")
        for h in (0.04, 0.02, 0.01)
    ]
    first = np.linalg.norm(finals[1] - finals[0])
    second = np.linalg.norm(finals[2] - finals[1])
    assert first > 0.0
    # fourth order: each halving should cut the change by about 16
    assert second < first / 4.0

"""
Tests for factorized regressions and the sampled certificates.
"""

import numpy as np
import pytest

from dremkit.core import DimensionError, SingularCoordinateError
from dremkit.core.npre import (
    NonlinearMap,
    ParameterChange,
    check_demidovich,
    check_lipschitz,
    check_strong_monotonicity,
    eval_good_map,
    jacobian_mismatch,
    nominal_theta,
)
from dremkit.plants import NPRE_REGISTRY, get_npre
from dremkit.plants.robot import robot_npre
from dremkit.plants.solar import solar_npre


def test_map_requires_more_outputs_than_parameters():
    with pytest.raises(DimensionError):
        NonlinearMap(2, 2, lambda th: th, lambda th: np.eye(2), ((0.0, 1.0), (0.0, 1.0)))


def test_map_rejects_empty_domain_interval():
    with pytest.raises(DimensionError):
        NonlinearMap(1, 2, lambda th: th, lambda th: np.eye(2, 1), ((1.0, 1.0),))


def test_change_rejects_non_bijective_permutation():
    with pytest.raises(DimensionError):
        ParameterChange(
            forward=lambda x: x,
            inverse=lambda x: x,
            inverse_jacobian=lambda x: np.eye(1),
            permutation=(0, 0),
            selector_rows=(0,),
            P=np.eye(1),
            rho=1.0,
            nu=1.0,
        )


def test_change_rejects_indefinite_weight():
    with pytest.raises(DimensionError):
        ParameterChange(
            forward=lambda x: x,
            inverse=lambda x: x,
            inverse_jacobian=lambda x: np.eye(2),
            permutation=(0, 1, 2),
            selector_rows=(0, 1),
            P=np.diag([1.0, -1.0]),
            rho=1.0,
            nu=1.0,
        )


def test_selection_matrix_matches_select():
    change = solar_npre().change
    w = np.arange(6.0)
    np.testing.assert_array_equal(change.selection_matrix() @ w, change.select(w))


def test_solar_good_map_is_identity(rng):
    npre = solar_npre()
    for theta in npre.map.sample_domain(rng, 20):
        eta = npre.to_eta(theta)
        np.testing.assert_allclose(eval_good_map(npre, eta), eta, rtol=1e-12, atol=1e-12)


def test_robot_good_map_at_nominal_point():
    npre = robot_npre()
    G = eval_good_map(npre, np.array([0.7, 0.8, 0.4, 1.4]))
    np.testing.assert_allclose(G, [0.28, 0.32, 0.4, 1.4], rtol=1e-12)


def test_robot_change_round_trip_matches_S():
    npre = robot_npre()
    theta = np.array([0.7, 0.8, 1.5, 0.5])
    np.testing.assert_allclose(npre.to_theta(npre.to_eta(theta)), theta, rtol=1e-12)
    np.testing.assert_allclose(npre.transformed_map(npre.to_eta(theta)), npre.map(theta), rtol=1e-12)


def test_good_map_rejects_wrong_shape():
    with pytest.raises(DimensionError):
        eval_good_map(solar_npre(), np.zeros(3))


def test_singular_inverse_raises():
    with pytest.raises(SingularCoordinateError) as info:
        solar_npre().to_theta(np.array([0.0, 0.5, 0.25, 0.5]))
    assert info.value.component == "eta[0]"


@pytest.mark.parametrize("name", sorted(NPRE_REGISTRY))
def test_jacobians_match_finite_differences(name):
    assert jacobian_mismatch(get_npre(name), 25, seed=0) < 1e-5


@pytest.mark.parametrize("name", ["solar", "appc-direct", "appc-indirect"])
def test_identity_good_maps_certify_with_eigenvalue_two(name):
    report = check_demidovich(get_npre(name), 200, seed=3)
    assert report.passed
    assert report.min_eigenvalue_found == pytest.approx(2.0, abs=1e-9)
    assert report.samples_checked == 200


def test_robot_certificate_passes_above_bound():
    report = check_demidovich(robot_npre(a=1.0), 1000, seed=0)
    assert report.passed
    assert report.min_eigenvalue_found >= 0.05


def test_robot_certificate_fails_below_bound():
    report = check_demidovich(robot_npre(a=0.5), 1000, seed=0)
    assert not report.passed
    assert report.min_eigenvalue_found < 0.0
    assert np.all(np.isfinite(report.worst_point))


def test_anti_monotone_map_fails(make_scaled_npre):
    npre = make_scaled_npre(-1.0, rho=0.1)
    report = check_demidovich(npre, 50, seed=1)
    assert not report.passed
    assert report.min_eigenvalue_found == pytest.approx(-2.0)
    assert not check_strong_monotonicity(npre, 50, seed=1).passed


@pytest.mark.parametrize("scale, rho", [(1.0, 1.0), (2.0, 2.0)])
def test_linear_good_maps_are_strongly_monotone(make_scaled_npre, scale, rho):
    report = check_strong_monotonicity(make_scaled_npre(scale, rho), 100, seed=2)
    assert report.passed
    assert report.min_eigenvalue_found == pytest.approx(scale)


def test_identity_map_lipschitz_ratio_is_one():
    report = check_lipschitz(solar_npre(), 200, seed=4)
    assert report.passed
    assert report.min_eigenvalue_found == pytest.approx(1.0, abs=1e-9)


def test_lipschitz_fails_for_undersized_nu(make_scaled_npre):
    report = check_lipschitz(make_scaled_npre(2.0, rho=1.0, nu=1.5), 20, seed=0)
    assert not report.passed
    assert report.min_eigenvalue_found == pytest.approx(2.0)


def test_certificates_are_deterministic_per_seed():
    first = check_demidovich(robot_npre(), 50, seed=7)
    second = check_demidovich(robot_npre(), 50, seed=7)
    assert first.min_eigenvalue_found == second.min_eigenvalue_found
    np.testing.assert_array_equal(first.worst_point, second.worst_point)


def test_sample_count_must_be_positive():
    with pytest.raises(ValueError):
        check_demidovich(solar_npre(), 0, seed=0)


def test_nominal_theta_holds_previous_on_singularity():
    npre = solar_npre()
    previous = np.array([0.5, 0.5, 0.5, 0.5])
    theta, held = nominal_theta(npre, np.array([0.0, 0.5, 0.25, 0.5]), previous)
    assert held
    np.testing.assert_array_equal(theta, previous)


def test_nominal_theta_without_previous_raises():
    with pytest.raises(SingularCoordinateError):
        nominal_theta(solar_npre(), np.array([0.0, 0.5, 0.25, 0.5]), None)

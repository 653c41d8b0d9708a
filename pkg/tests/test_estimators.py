"""
Tests for the DREM estimators, the gain checks and the excitation trackers.
"""

import math

import numpy as np
import pytest

from dremkit.core import DimensionError, GainTooLargeError, NormalizationError
from dremkit.core.estimators import (
    CTDremEstimator,
    DTDremEstimator,
    ExcitationTracker,
    GradientBaseline,
    ct_estimator_derivative,
    dt_estimator_step,
    dt_gradient_baseline_step,
    convergence_gain_interval,
    track_excitation,
    validate_dt_gains,
)
from dremkit.core.mixing import MixedOutput
from dremkit.core.npre import eval_good_map
from dremkit.plants.robot import robot_npre
from dremkit.plants.solar import solar_npre


def test_gain_report_for_identity_good_map():
    report = validate_dt_gains(2.0, 1.0, np.eye(1), gamma=1.0, kappa=3.0)
    assert report.sigma == pytest.approx(3.0)
    assert report.kappa_min == pytest.approx(3.0)
    assert report.interval_defined
    assert report.gamma_in_interval


def test_convergence_interval_endpoints():
    low, high = convergence_gain_interval(2.0, 1.0, 1.0)
    assert low == pytest.approx(2.0 - math.sqrt(3.0), abs=1e-12)
    assert high == pytest.approx(2.0 + math.sqrt(3.0), abs=1e-12)


def test_convergence_interval_undefined_for_large_nu():
    assert convergence_gain_interval(0.05, 2.0, 1.0) is None


def test_gain_too_large_is_rejected():
    with pytest.raises(GainTooLargeError):
        validate_dt_gains(2.0, 1.0, np.eye(1), gamma=4.0, kappa=10.0)


def test_small_kappa_is_rejected():
    with pytest.raises(NormalizationError):
        validate_dt_gains(2.0, 1.0, np.eye(1), gamma=1.0, kappa=2.0)


def test_kappa_at_least_one_even_for_small_sigma():
    report = validate_dt_gains(2.0, 1.0, np.eye(1), gamma=0.1, kappa=1.0)
    assert report.sigma == pytest.approx(0.39)
    assert report.kappa_min == 1.0


def test_from_change_strict_and_lenient():
    change = solar_npre().change
    with pytest.raises(NormalizationError):
        DTDremEstimator.from_change(np.zeros(4), 1.0, 2.0, change)
    est = DTDremEstimator.from_change(np.zeros(4), 1.0, 2.0, change, strict=False)
    assert est.sigma == pytest.approx(3.0)
    with pytest.raises(GainTooLargeError):
        DTDremEstimator.from_change(np.zeros(4), 5.0, 30.0, change, strict=False)


def _exact_mixed(npre, eta, delta):
    return MixedOutput(script_y=delta * eval_good_map(npre, eta), delta=delta)


def test_dt_step_contracts_identity_map():
    npre = solar_npre()
    eta = npre.to_eta(np.array([0.5, 0.5, 0.5, 0.5]))
    est = DTDremEstimator.from_change(eta - 0.5, 1.0, 3.0, npre.change)
    updated = dt_estimator_step(est, _exact_mixed(npre, eta, 2.0), npre)
    # factor 1 - gamma delta^2 / (1 + kappa delta^2) = 1 - 4/13
    np.testing.assert_allclose(updated - eta, (1.0 - 4.0 / 13.0) * (est.eta_hat - eta))


def test_dt_step_holds_when_delta_is_zero():
    npre = solar_npre()
    est = DTDremEstimator.from_change(np.ones(4), 1.0, 3.0, npre.change)
    mixed = MixedOutput(script_y=np.full(4, 7.0), delta=0.0)
    np.testing.assert_array_equal(dt_estimator_step(est, mixed, npre), est.eta_hat)


def test_dt_error_norm_never_increases(rng):
    npre = solar_npre()
    eta = npre.to_eta(np.array([0.3, 0.6, 0.9, 0.2]))
    est = DTDremEstimator.from_change(eta + rng.normal(size=4), 1.0, 3.0, npre.change)
    error = np.linalg.norm(est.eta_hat - eta)
    for delta in rng.normal(scale=10.0, size=50):
        est = DTDremEstimator(dt_estimator_step(est, _exact_mixed(npre, eta, delta), npre),
                              est.gamma, est.kappa, est.P, est.sigma)
        new_error = np.linalg.norm(est.eta_hat - eta)
        assert new_error <= error + 1e-12 * (1.0 + error)
        error = new_error


def test_ct_derivative_plain_law():
    npre = solar_npre()
    eta = np.array([-0.5, 0.5, 0.25, 0.5])
    est = CTDremEstimator(eta + 0.1, 2.0 * np.eye(4), np.eye(4))
    deta = ct_estimator_derivative(est, _exact_mixed(npre, eta, 3.0), npre)
    # Gamma P delta^2 (eta - eta_hat)
    np.testing.assert_allclose(deta, 2.0 * 9.0 * -0.1 * np.ones(4))


def test_ct_derivative_normalized_rate_is_bounded():
    npre = robot_npre()
    eta = npre.to_eta(np.array([0.7, 0.8, 1.5, 0.5]))
    est = CTDremEstimator(eta * 0.5, 5.0 * np.eye(4), npre.change.P, kappa=1.0)
    small = ct_estimator_derivative(est, _exact_mixed(npre, eta, 1e-3), npre)
    large = ct_estimator_derivative(est, _exact_mixed(npre, eta, 1e6), npre)
    bound = 5.0 * np.linalg.norm(eval_good_map(npre, eta) - eval_good_map(npre, est.eta_hat))
    assert np.linalg.norm(large) <= bound * (1.0 + 1e-9)
    assert np.linalg.norm(small) < np.linalg.norm(large)


def test_ct_derivative_zero_without_excitation():
    npre = solar_npre()
    est = CTDremEstimator(np.ones(4), np.eye(4), np.eye(4))
    mixed = MixedOutput(script_y=np.ones(4), delta=0.0)
    np.testing.assert_array_equal(ct_estimator_derivative(est, mixed, npre), np.zeros(4))


def test_ct_estimator_validation():
    with pytest.raises(DimensionError):
        CTDremEstimator(np.zeros(2), np.eye(3), np.eye(2))
    with pytest.raises(DimensionError):
        CTDremEstimator(np.zeros(2), -np.eye(2), np.eye(2))
    with pytest.raises(DimensionError):
        CTDremEstimator(np.zeros(2), np.eye(2), np.eye(2), kappa=-1.0)


def test_gradient_baseline_fits_current_sample():
    base = GradientBaseline(np.zeros(3), gamma=1e-9)
    omega = np.array([[1.0, 2.0, 3.0]])
    S_hat = dt_gradient_baseline_step(base, omega, np.array([14.0]))
    assert float((omega @ S_hat)[0]) == pytest.approx(14.0, rel=1e-6)


def test_gradient_baseline_posterior_residual_shrinks():
    base = GradientBaseline(np.array([1.0, -1.0]), gamma=1.0)
    omega = np.array([[2.0, 1.0]])
    y = np.array([4.0])
    prior = float((y - omega @ base.S_hat)[0])
    posterior = float((y - omega @ dt_gradient_baseline_step(base, omega, y))[0])
    # gamma / (gamma + |omega|^2) of the prior residual
    assert posterior == pytest.approx(prior / 6.0)


def test_gradient_baseline_rejects_bad_gain():
    with pytest.raises(DimensionError):
        GradientBaseline(np.zeros(2), gamma=0.0)


def test_continuous_tracker_integrates_delta_squared():
    tracker = ExcitationTracker.continuous()
    for _ in range(10):
        tracker = track_excitation(tracker, 2.0, dt=0.1)
    assert tracker.integral_delta_sq == pytest.approx(4.0)
    assert tracker.sum_delta_sq == pytest.approx(40.0)


def test_discrete_tracker_product_with_kappa_equal_sigma():
    tracker = track_excitation(ExcitationTracker.discrete(kappa=3.0, sigma=3.0), 1.0)
    assert tracker.product == pytest.approx(1.0 / 4.0)
    assert tracker.integral_delta_sq == pytest.approx(1.0 / 4.0)
    assert tracker.sum_delta_sq == pytest.approx(1.0)


def test_tracker_kinds_are_not_mixed():
    with pytest.raises(ValueError):
        track_excitation(ExcitationTracker.discrete(3.0, 3.0), 1.0, dt=0.1)
    with pytest.raises(ValueError):
        track_excitation(ExcitationTracker.continuous(), 1.0)

"""
Tests for the scenario run loops.
"""

import numpy as np
import pytest

from dremkit.core import ConfigError, SingularCoordinateError
from dremkit.sim import engine
from dremkit.sim.engine import StateLayout, run_ct_scenario, run_dt_scenario, run_scenario
from dremkit.sim.scenarios import get_scenario


def _non_increasing(values, rel=1e-12, abs_tol=1e-15):
    steps = np.diff(values)
    return bool(np.all(steps <= rel * np.abs(values[:-1]) + abs_tol))


def test_state_layout_round_trip():
    layout = StateLayout(a=2, b=4)
    x = layout.join(a=np.array([1.0, 2.0]), b=np.arange(4.0).reshape(2, 2))
    assert layout.size == 6
    parts = layout.split(x)
    np.testing.assert_array_equal(parts["b"], [0.0, 1.0, 2.0, 3.0])
    with pytest.raises(ConfigError):
        layout.join(a=np.zeros(2))


@pytest.mark.parametrize("name", ["solar", "appc-indirect", "appc-direct", "robot2dof-drem"])
def test_zero_horizon_records_initial_row(name):
    trace = run_scenario(get_scenario(name).with_overrides({"horizon": 0}))
    assert len(trace) == 1


def test_kind_mismatch_is_rejected():
    with pytest.raises(ConfigError):
        run_ct_scenario(get_scenario("solar"))
    with pytest.raises(ConfigError):
        run_dt_scenario(get_scenario("robot2dof-drem"))


def test_solar_estimate_error_never_increases():
    trace = run_dt_scenario(get_scenario("solar"))
    assert len(trace) == 97
    errors = trace.column("eta_error")
    assert errors[0] == pytest.approx(1.0)
    assert _non_increasing(errors)
    assert np.all(np.diff(trace.column("excitation_sum")) >= 0.0)
    assert not np.any(trace.column("singular"))


def test_solar_identifies_theta():
    trace = run_dt_scenario(get_scenario("solar"))
    theta_error = np.abs(trace.last("theta_hat") - 0.5)
    assert np.max(theta_error) < 5e-2


def test_solar_gradient_baseline_fits_data_with_wrong_parameters():
    trace = run_dt_scenario(get_scenario("solar"))
    assert abs(trace.last("residual")) < 1e-3
    assert trace.last("S_error") > 5e-2


def test_solar_gradient_baseline_residuals_shrink():
    trace = run_dt_scenario(get_scenario("solar"))
    prior = np.abs(trace.column("residual_prior"))
    post = np.abs(trace.column("residual"))
    assert np.all(post <= prior + 1e-12)


def test_direct_estimate_error_never_increases():
    trace = run_dt_scenario(get_scenario("appc-direct"))
    assert len(trace) == 201
    errors = trace.column("eta_error")
    assert errors[0] == pytest.approx(0.4)
    assert _non_increasing(errors)


def test_indirect_known_parameter_tracks_across_switch():
    trace = run_dt_scenario(get_scenario("appc-indirect").with_overrides({"adapt": False}))
    assert len(trace) == 101
    assert np.max(np.abs(trace.column("tracking_error"))) < 1e-9
    theta = trace.column("theta_plant")
    assert theta[50] == 0.5
    assert theta[51] == -0.5


def test_indirect_estimate_stays_in_region_and_tracks_each_segment():
    scenario = get_scenario("appc-indirect")
    assert scenario.r_amplitude == 1.0
    assert scenario.r_frequencies == (0.3,)
    trace = run_dt_scenario(scenario)
    theta_hat = trace.column("theta_hat")
    assert np.all(np.abs(theta_hat) < 1.0)
    assert not np.any(trace.column("control_held"))

    error = np.abs(trace.column("tracking_error"))
    # segments k <= 50 and k >= 51; check the last fifth of each
    assert np.max(error[41:51]) < 1e-3
    assert np.max(error[91:]) < 1e-3
    assert theta_hat[-1] == pytest.approx(-0.5, abs=1e-6)


def test_indirect_switch_restarts_extension_once():
    trace = run_dt_scenario(get_scenario("appc-indirect"))
    restarts = np.flatnonzero(trace.column("extension_restart"))
    np.testing.assert_array_equal(restarts, [52])
    assert any("restarting filters" in event for event in trace.events)
    # filters refilled with one row: no mixed regression yet
    assert trace.column("delta")[52] == pytest.approx(0.0, abs=1e-6)


def test_indirect_estimate_is_exact_before_switch():
    trace = run_dt_scenario(get_scenario("appc-indirect"))
    assert np.max(trace.column("eta_error")[:51]) < 1e-9
    assert np.max(np.abs(trace.column("tracking_error")[:51])) < 1e-9
    assert np.all(np.isfinite(trace.as_array()))


def test_dt_runs_are_deterministic(scenario_with):
    scenario = scenario_with("appc-direct", horizon=40)
    first = run_dt_scenario(scenario).as_array()
    second = run_dt_scenario(scenario).as_array()
    np.testing.assert_array_equal(first, second)


def test_metadata_describes_run(scenario_with):
    trace = run_dt_scenario(scenario_with("solar", horizon=3))
    assert trace.metadata["npre"] == "solar"
    assert trace.metadata["steps"] == "3"
    assert trace.oracle_columns[0] == "eta_error"


def test_overparam_scenario_records_S_hat(scenario_with):
    trace = run_ct_scenario(scenario_with("robot2dof-overparam", horizon=0.05))
    assert len(trace) == 6
    assert trace.column("S_hat").shape == (6, 5)
    assert "S_error" in trace.oracle_columns
    np.testing.assert_allclose(trace.column("S_hat")[0], [0.01] * 5)


def test_robot_record_every_keeps_last_step():
    trace = run_ct_scenario(
        get_scenario("robot2dof-drem").with_overrides({"horizon": 0.025, "record_every": 10})
    )
    np.testing.assert_allclose(trace.column("t"), [0.0, 0.01, 0.02, 0.025])


def test_robot_scenario_runs_the_plain_law():
    scenario = get_scenario("robot2dof-drem")
    assert scenario.ct_kappa == 0.0
    assert scenario.gain_matrix(4).max() == 1.0
    assert get_scenario("robot2dof-overparam").gradient_gain_matrix(5).max() == 5.0


@pytest.mark.slow
def test_robot_full_run_estimate_error_and_lyapunov_bound():
    scenario = get_scenario("robot2dof-drem").with_overrides({"record_every": 1})
    trace = run_ct_scenario(scenario)
    assert len(trace) == 20001
    assert np.all(np.isfinite(trace.as_array()))

    errors = trace.column("eta_error")
    assert np.max(np.diff(errors)) <= 1e-6
    assert errors[-1] < 1e-3

    # RK4 stays inside its stability interval at the peak of Gamma Delta^2
    assert scenario.h * np.max(trace.column("delta_sq")) < 2.785

    V = trace.column("lyapunov")
    excitation = trace.column("excitation_integral")
    # rate 2 rho / lambda_max(Gamma) with rho = 0.05, Gamma = I; 1e-20 is the rounding floor
    bound = V[0] * np.exp(-0.1 * excitation)
    assert np.all(V <= bound * 1.001 + 1e-20)


@pytest.mark.slow
def test_robot_known_parameters_dissipate_sliding_energy():
    scenario = get_scenario("robot2dof-drem").with_overrides({"horizon": 2.0, "adapt": False})
    trace = run_ct_scenario(scenario)
    energy = trace.column("sliding_energy")
    assert np.all(np.diff(energy) <= 1e-8)
    assert energy[-1] < energy[0]


def test_failed_estimator_update_keeps_estimate_and_flags(scenario_with, monkeypatch):
    calls = []
    step = engine.dt_estimator_step

    def failing_step(est, mixed, npre):
        calls.append(1)
        if len(calls) == 10:
            raise SingularCoordinateError("eta[0]", 0.0, "direct APPC inverse map")
        return step(est, mixed, npre)

    monkeypatch.setattr(engine, "dt_estimator_step", failing_step)
    trace = run_dt_scenario(scenario_with("appc-direct", horizon=20))
    assert len(trace) == 21
    singular = trace.column("singular")
    assert singular[9] == 1.0
    assert singular.sum() == 1.0
    np.testing.assert_array_equal(trace.column("eta_hat")[10], trace.column("eta_hat")[9])
    assert any("estimator update failed" in event for event in trace.events)

"""
Tests for scenario processing and summaries.
"""

from pathlib import Path

import numpy as np
import pytest

from dremkit.core import ConfigError
from dremkit.core.runner import certify, process_scenario, summarize, write_trace
from dremkit.plants.appc import indirect_npre
from dremkit.sim.scenarios import Scenario, get_scenario
from dremkit.sim.trace import Column, Trace, load_csv


@pytest.mark.integration
def test_process_scenario_writes_trace(temp_dir):
    summary, error = process_scenario(get_scenario("solar"), temp_dir)
    assert error is None
    assert summary.rows == 97
    assert Path(summary.output) == temp_dir / "solar.csv"
    header, data = load_csv(summary.output)
    assert data.shape == (97, len(header))
    assert summary.singular_events == 0
    assert np.isfinite(summary.final_eta_error)


@pytest.mark.integration
def test_repeated_runs_write_identical_files(temp_dir):
    scenario = get_scenario("appc-direct").with_overrides({"horizon": 40})
    first, _ = process_scenario(scenario, temp_dir, "first.csv")
    second, _ = process_scenario(scenario, temp_dir, "second.csv")
    assert Path(first.output).read_bytes() == Path(second.output).read_bytes()


def test_process_scenario_reports_loop_errors(temp_dir):
    scenario = get_scenario("appc-direct").with_overrides({"estimator": "gradient"})
    summary, error = process_scenario(scenario, temp_dir)
    assert summary is None
    assert "appc-direct" in error


def test_process_scenario_raises_config_errors(temp_dir):
    scenario = Scenario(name="broken", kind="dt", npre="nope", horizon=3)
    with pytest.raises(ConfigError):
        process_scenario(scenario, temp_dir)


def test_write_trace_to_missing_directory(temp_dir):
    trace = Trace("t", (Column("t"),))
    path, error = write_trace(trace, temp_dir / "missing", "t.csv")
    assert path is None
    assert error.startswith("[Errno")
    assert "t.csv" in error


def test_write_trace_reports_os_error_verbatim(temp_dir, monkeypatch):
    def full_disk(trace, path):
        raise OSError(28, "No space left on device")

    monkeypatch.setattr("dremkit.sim.trace.export_csv", full_disk)
    path, error = write_trace(Trace("t", (Column("t"),)), temp_dir, "t.csv")
    assert path is None
    assert error == "[Errno 28] No space left on device"


def test_summarize_empty_trace():
    summary = summarize(Trace("empty", (Column("t"), Column("eta_error"))))
    assert summary.rows == 0
    assert np.isnan(summary.final_eta_error)
    assert np.isnan(summary.final_tracking_error)


def test_summary_lines_mention_output():
    trace = Trace("demo", (Column("eta_error"), Column("tracking_error"), Column("excitation_sum")))
    trace.record(eta_error=0.5, tracking_error=0.1, excitation_sum=2.0)
    lines = summarize(trace, "out/demo.csv").lines()
    assert lines[0].endswith("demo")
    assert lines[-1].endswith("out/demo.csv")


def test_certify_identity_map_passes():
    result = certify(indirect_npre(), samples=200, seed=0)
    assert result.passed
    assert result.demidovich.min_eigenvalue_found == pytest.approx(2.0)
    assert not any("witness" in line for line in result.lines())


def test_certify_reports_witness_on_failure():
    npre = get_scenario("robot2dof-drem").with_overrides({"P_diag": [1, 1, 0.5, 0.5]}).build_npre()
    result = certify(npre, samples=1000, seed=0)
    assert not result.passed
    assert any("witness" in line for line in result.lines())
    assert "FAIL" in result.lines()[1]

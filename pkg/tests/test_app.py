"""
Tests for the drem command line.
"""

import pytest

from app import EXIT_FAILURE, EXIT_OK, EXIT_USAGE, main
from dremkit.sim.trace import load_csv


def test_list(capsys):
    assert main(["list"]) == EXIT_OK
    lines = capsys.readouterr().out.strip().splitlines()
    assert len(lines) == 5
    assert lines[0].startswith("robot2dof-drem")


def test_list_prints_anchor_for_each_scenario(capsys):
    main(["list"])
    lines = capsys.readouterr().out.strip().splitlines()
    anchors = dict(line.split("  [", 1)[0].split(" \u2014 ", 1) for line in lines)
    assert anchors == {
        "robot2dof-drem": "two-link arm simulation",
        "robot2dof-overparam": "two-link arm simulation",
        "solar": "solar-heated house identification",
        "appc-indirect": "indirect pole placement",
        "appc-direct": "direct pole placement",
    }


def test_certify_registered_map(capsys):
    assert main(["certify", "solar", "--samples", "200"]) == EXIT_OK
    assert "pass" in capsys.readouterr().out


def test_certify_failing_weight(capsys):
    code = main(["certify", "robot2dof", "--set", "P_diag=[1,1,0.5,0.5]"])
    assert code == EXIT_FAILURE
    assert "witness" in capsys.readouterr().out


def test_certify_unknown_name(capsys):
    assert main(["certify", "nope"]) == EXIT_USAGE
    assert "unknown scenario" in capsys.readouterr().err


@pytest.mark.parametrize(
    "argv, expected",
    [
        (["validate-gains", "solar"], EXIT_OK),
        (["validate-gains", "appc-indirect"], EXIT_OK),
        (["validate-gains", "appc-indirect", "--kappa", "2"], EXIT_FAILURE),
        (["validate-gains", "solar", "--gamma", "4"], EXIT_FAILURE),
        (["validate-gains", "solar", "--kappa", "2"], EXIT_FAILURE),
    ],
)
def test_validate_gains(argv, expected):
    assert main(argv) == expected


def test_validate_gains_prints_sigma(capsys):
    main(["validate-gains", "solar"])
    out = capsys.readouterr().out
    assert "sigma = 3" in out
    assert "valid" in out.splitlines()[-1]


@pytest.mark.integration
def test_run_writes_trace(temp_dir, capsys):
    assert main(["run", "appc-indirect", "-o", str(temp_dir)]) == EXIT_OK
    assert (temp_dir / "appc-indirect.csv").exists()
    rows = [line for line in capsys.readouterr().out.splitlines() if line.startswith("rows:")]
    assert rows[0].split() == ["rows:", "101"]


@pytest.mark.integration
def test_run_with_low_kappa_warns_and_succeeds(temp_dir, caplog):
    assert main(["run", "appc-indirect", "-o", str(temp_dir), "--kappa", "2"]) == EXIT_OK
    assert any("unvalidated normalization" in r.getMessage() for r in caplog.records)


@pytest.mark.integration
def test_run_in_parallel(temp_dir):
    argv = ["run", "solar", "appc-direct", "-o", str(temp_dir), "-j", "2", "--horizon", "20"]
    assert main(argv) == EXIT_OK
    _, solar = load_csv(temp_dir / "solar.csv")
    _, direct = load_csv(temp_dir / "appc-direct.csv")
    assert solar.shape[0] == direct.shape[0] == 21


@pytest.mark.parametrize(
    "override",
    ["bad key=1", "nonsense=1", "horizon=[1, 2]", "missing-separator"],
)
def test_bad_overrides_are_usage_errors(override, temp_dir, capsys):
    assert main(["run", "solar", "-o", str(temp_dir), "--set", override]) == EXIT_USAGE
    assert capsys.readouterr().err.startswith("error:")


def test_run_without_scenario():
    assert main(["run"]) == EXIT_USAGE


@pytest.mark.integration
def test_run_from_config_file(temp_dir):
    config = temp_dir / "short.cfg"
    config.write_text("# ten samples\nscenario = solar\nhorizon = 10\n", encoding="utf-8")
    out = temp_dir / "out"
    assert main(["run", "--config", str(config), "-o", str(out)]) == EXIT_OK
    _, data = load_csv(out / "solar-short.csv")
    assert data.shape[0] == 11


@pytest.mark.integration
def test_flags_win_over_config_file(temp_dir):
    config = temp_dir / "short.cfg"
    config.write_text("scenario = solar\nhorizon = 10\n", encoding="utf-8")
    assert main(["run", "--config", str(config), "-o", str(temp_dir), "--horizon", "5"]) == EXIT_OK
    _, data = load_csv(temp_dir / "solar-short.csv")
    assert data.shape[0] == 6


def test_config_file_without_scenario_uses_name(temp_dir):
    config = temp_dir / "gain.cfg"
    config.write_text("horizon = 4\ngamma = 0.5\n", encoding="utf-8")
    assert main(["run", "appc-direct", "--config", str(config), "-o", str(temp_dir)]) == EXIT_OK
    assert (temp_dir / "appc-direct-gain.csv").exists()


def test_failed_run_exit_code(temp_dir, capsys):
    argv = ["run", "appc-direct", "-o", str(temp_dir), "--estimator", "gradient"]
    assert main(argv) == EXIT_FAILURE
    assert "Error running appc-direct" in capsys.readouterr().err

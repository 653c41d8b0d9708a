"""
Scenario processing: run, export and summarize, reporting failures as messages.
"""

import logging
import os
from dataclasses import dataclass
from pathlib import Path
from typing import TYPE_CHECKING, Optional, Union

import numpy as np

from . import ConfigError, DremError, ProcessingResult
from .npre import CertificateReport, FactorizedNPRE, check_demidovich, check_lipschitz

if TYPE_CHECKING:
    from dremkit.sim.scenarios import Scenario
    from dremkit.sim.trace import Trace

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class RunSummary:
    """Headline numbers of a finished run."""

    scenario: str
    rows: int
    final_eta_error: float
    final_tracking_error: float
    excitation: float
    singular_events: int
    output: Optional[str] = None

    def lines(self) -> list[str]:
        lines = [
            f"scenario:              {self.scenario}",
            f"rows:                  {self.rows}",
            f"final |eta_tilde|:     {self.final_eta_error:.6g}",
            f"final tracking error:  {self.final_tracking_error:.6g}",
            f"excitation:            {self.excitation:.6g}",
            f"singularity events:    {self.singular_events}",
        ]
        if self.output:
            lines.append(f"trace:                 {self.output}")
        return lines


@dataclass(frozen=True)
class CertificationResult:
    name: str
    rho: float
    nu: float
    demidovich: CertificateReport
    lipschitz: CertificateReport

    @property
    def passed(self) -> bool:
        return self.demidovich.passed and self.lipschitz.passed

    def lines(self) -> list[str]:
        def verdict(report: CertificateReport) -> str:
            return "pass" if report.passed else "FAIL"

        lines = [
            f"{self.name}: rho = {self.rho:g}, nu = {self.nu:g}",
            f"  min eig(P dG + dG^T P) = {self.demidovich.min_eigenvalue_found:.6g}"
            f"  [{verdict(self.demidovich)}, {self.demidovich.samples_checked} samples]",
            f"  max |dG| / |d eta|     = {self.lipschitz.min_eigenvalue_found:.6g}"
            f"  [{verdict(self.lipschitz)}, {self.lipschitz.samples_checked} pairs]",
        ]
        for report in (self.demidovich, self.lipschitz):
            if not report.passed:
                point = np.array2string(report.worst_point, precision=6)
                lines.append(f"  witness eta = {point}")
                if report.failure:
                    lines.append(f"  failure: {report.failure}")
        return lines


def certify(npre: FactorizedNPRE, samples: int, seed: int) -> CertificationResult:
    """Sample the Demidovich and Lipschitz conditions for a factorization."""
    logger.info(f"Certifying {npre.name} on {samples} samples (seed {seed})")
    return CertificationResult(
        name=npre.name,
        rho=npre.change.rho,
        nu=npre.change.nu,
        demidovich=check_demidovich(npre, samples, seed),
        lipschitz=check_lipschitz(npre, samples, seed),
    )


def summarize(trace: "Trace", output: Optional[str] = None) -> RunSummary:
    """Final |eta_tilde|, tracking error and accumulated excitation of a trace."""
    names = {column.name for column in trace.schema}
    if "excitation_integral" in names:
        excitation_column = "excitation_integral"
    else:
        excitation_column = "excitation_sum"
    empty = len(trace) == 0

    def final(name: str) -> float:
        return float("nan") if empty or name not in names else float(trace.last(name))  # type: ignore[arg-type]

    return RunSummary(
        scenario=trace.scenario,
        rows=len(trace),
        final_eta_error=final("eta_error"),
        final_tracking_error=final("tracking_error"),
        excitation=final(excitation_column),
        singular_events=len(trace.events),
        output=output,
    )


def write_trace(trace: "Trace", out_dir: Union[str, Path], filename: str) -> ProcessingResult:
    """
    Export a trace below ``out_dir``.

    Returns:
        Tuple containing (output_file_path, error_message).
        If successful, error_message will be None.
    """
    from dremkit.sim.trace import export_csv

    try:
        path = Path(out_dir) / filename
        export_csv(trace, path)
        return os.fspath(path), None
    except OSError as e:
        return None, str(e)


def process_scenario(
    scenario: "Scenario", out_dir: Union[str, Path], filename: Optional[str] = None
) -> tuple[Optional[RunSummary], Optional[str]]:
    """
    Run one scenario end to end.

    Args:
        scenario: Scenario with overrides applied
        out_dir: Directory for the CSV trace
        filename: Trace file name, ``<scenario>.csv`` by default

    Returns:
        Tuple containing (summary, error_message).
        If successful, error_message will be None.
    """
    from dremkit.sim.engine import run_scenario
    from dremkit.utils.filesystem import trace_filename

    try:
        trace = run_scenario(scenario)
    except ConfigError:
        raise
    except (DremError, ArithmeticError) as e:
        logger.error(f"{scenario.name} failed: {e}")
        return None, f"Error running {scenario.name}: {e}"

    path, error = write_trace(trace, out_dir, filename or trace_filename(scenario.name))
    if error:
        return None, error
    return summarize(trace, path), None

"""
dremkit: DREM-based estimation for nonlinearly parameterized regression equations.
"""

from .core.estimators import CTDremEstimator, DTDremEstimator, validate_dt_gains
from .core.mixing import adjugate, determinant, mix
from .core.npre import FactorizedNPRE, NonlinearMap, ParameterChange, check_demidovich
from .core.runner import process_scenario
from .plants import get_npre
from .sim.engine import run_ct_scenario, run_dt_scenario
from .sim.scenarios import SCENARIOS, Scenario
from .sim.trace import Trace, export_csv

__version__ = "0.1.0"

__all__ = [
    "CTDremEstimator",
    "DTDremEstimator",
    "validate_dt_gains",
    "adjugate",
    "determinant",
    "mix",
    "FactorizedNPRE",
    "NonlinearMap",
    "ParameterChange",
    "check_demidovich",
    "process_scenario",
    "get_npre",
    "run_ct_scenario",
    "run_dt_scenario",
    "SCENARIOS",
    "Scenario",
    "Trace",
    "export_csv",
]

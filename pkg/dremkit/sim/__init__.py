"""
Simulation: integrators, traces, scenarios and the run loops.
"""

from .integrators import integrate, rk4_step
from .trace import Column, Trace, export_csv, load_csv

__all__ = ["Column", "Trace", "export_csv", "integrate", "load_csv", "rk4_step"]

"""NGMRES-accelerated Picard iteration for the steady 2D lid-driven cavity."""

from .accel import DriverConfig, NormChoice, drive
from .experiments import RunConfig, compare_norms, run, sweep_mesh
from .flow import FlowProblem, nonlinear_residual, picard_solve, riesz_representer
from .grid import BoundaryData, MacGrid, VelocityField

__all__ = [
    "BoundaryData",
    "DriverConfig",
    "FlowProblem",
    "MacGrid",
    "NormChoice",
    "RunConfig",
    "VelocityField",
    "compare_norms",
    "drive",
    "nonlinear_residual",
    "picard_solve",
    "riesz_representer",
    "run",
    "sweep_mesh",
]

__version__ = "0.1.0"

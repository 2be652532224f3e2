"""Randomized Kaczmarz and Gauss-Seidel solvers for ridge regression."""

from .harness import ExperimentConfig, aggregate, parse_config, run_grid
from .problems import ProblemInstance, generate, load, save
from .solvers import IZInit, SolverKind, SolverState, StepReport, TraceRecord, init, run, step
from .theory import (
    OracleSolutions,
    RateBound,
    compute_oracle,
    contraction_factor,
    expected_onestep_error,
    iz_condition_check,
)

__all__ = [
    "ExperimentConfig", "IZInit", "OracleSolutions", "ProblemInstance", "RateBound",
    "SolverKind", "SolverState", "StepReport", "TraceRecord", "aggregate", "compute_oracle",
    "contraction_factor", "expected_onestep_error", "generate", "init", "iz_condition_check",
    "load", "parse_config", "run", "run_grid", "save", "step",
]
__version__ = "0.1.0"

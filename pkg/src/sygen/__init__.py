"""Newsvendor with symmetric power losses: optimal order quantities, estimators
for unknown demand parameters and a Monte Carlo comparison harness."""

from .core import CostParams, expected_cost, expected_cost_quadrature, realized_cost
from .demand import Exponential, Uniform
from .estimators import BrokenSample, EstimatorKind, FullSample, estimate
from .exceptions import (
    DomainError,
    EstimationFailure,
    HypothesisViolation,
    NoRootError,
    NumericalError,
    SygenError,
)
from .model import SyGenNewsvendor
from .simulation import SimulationConfig, SimulationReport, run_cell, run_experiment, sweep_qstar
from .solver import OptimalSolution, optimal_cost_uniform, optimal_q, solve_dimensionless

__version__ = "0.1.0"

__all__ = [
    "CostParams",
    "expected_cost",
    "expected_cost_quadrature",
    "realized_cost",
    "Exponential",
    "Uniform",
    "BrokenSample",
    "EstimatorKind",
    "FullSample",
    "estimate",
    "DomainError",
    "EstimationFailure",
    "HypothesisViolation",
    "NoRootError",
    "NumericalError",
    "SygenError",
    "SyGenNewsvendor",
    "SimulationConfig",
    "SimulationReport",
    "run_cell",
    "run_experiment",
    "sweep_qstar",
    "OptimalSolution",
    "optimal_cost_uniform",
    "optimal_q",
    "solve_dimensionless",
]

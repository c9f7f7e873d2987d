"""Constrained Bayesian optimization with upper-trust-bound feasibility."""
from .feasibility import Schedule
from .optimizer import SolverConfig, best_point, run
from .problems import get_problem

__all__ = ["Schedule", "SolverConfig", "best_point", "get_problem", "run"]
__version__ = "0.1.0"

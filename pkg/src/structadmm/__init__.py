"""Conventional and structure-exploiting ADMM for linear MPC problems, with
penalty tuning, separation-tendency analysis and an operation-count model."""

__version__ = "0.1.0"

from .admm import AdmmConfig, AdmmState, IterTrace, Solution, SolverCache, dist, solve_conventional, solve_structured
from .errors import *  # noqa: F401,F403
from .oracle import reference_solve
from .penalty import tune_penalties
from .problem import (ConstraintSet, Decomposition, LtiSystem, MpcProblem, Partition, PartitionedProblem,
                      build_stacked, decompose, validate_admissibility, verify_equivalence)
from .runner import solve_problem
from .structure import analyze, link_usage

__all__ = [
    "AdmmConfig", "AdmmState", "IterTrace", "Solution", "SolverCache", "dist", "solve_conventional",
    "solve_structured", "ConstraintSet", "Decomposition", "LtiSystem", "MpcProblem", "Partition",
    "PartitionedProblem", "build_stacked", "decompose", "validate_admissibility", "verify_equivalence",
    "reference_solve", "tune_penalties", "solve_problem", "analyze", "link_usage",
]

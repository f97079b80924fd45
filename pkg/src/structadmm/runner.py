"""High-level solve entry point shared by the command line and the service."""

from __future__ import annotations

import re
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .admm import AdmmConfig, Solution, SolverCache, solve_conventional, solve_structured, check_beta
from .costmodel import count_iteration, default_use_case, thread_partition
from .errors import InvalidConfig
from .penalty import tune_penalties
from .problem import MpcProblem, Partition, PartitionedProblem, build_stacked


@dataclass(frozen=True)
class RhoPolicy:
    """``unit`` (rho_i = 1), ``optimal`` (rho_i*) or ``optimal`` times ``scale``."""

    kind: str = "unit"
    scale: float = 1.0

    @classmethod
    def parse(cls, text):
        text = str(text).strip().lower()
        if text == "unit":
            return cls("unit")
        if text == "optimal":
            return cls("optimal")
        m = re.fullmatch(r"scale=([0-9.eE+-]+)", text)
        if m:
            scale = float(m.group(1))
            if not scale > 0:
                raise InvalidConfig("rho scale must be positive")
            return cls("optimal", scale)
        raise InvalidConfig(f"unknown rho policy {text!r}; use unit, optimal or scale=<r>")

    def __str__(self):
        if self.kind == "unit":
            return "unit"
        return "optimal" if self.scale == 1.0 else f"scale={self.scale:g}"


def resolve_rho(pp: PartitionedProblem, policy: RhoPolicy):
    if policy.kind == "unit":
        return np.ones(pp.M)
    return tune_penalties(pp).rho * policy.scale


@dataclass
class SolveResult:
    solution: Solution
    pp: PartitionedProblem
    rho: np.ndarray
    beta: float
    ops_per_iter: int
    algo: str


def solve_problem(problem: MpcProblem, partition: Optional[Partition] = None, *,
                  algo: str = "structured", beta: Optional[float] = None,
                  rho: RhoPolicy = RhoPolicy(), threads: str = "1", max_iters: int = 20000,
                  tol: float = 1e-8, reference=None, dist_target: Optional[float] = None,
                  record_trace: bool = True) -> SolveResult:
    """Build the stacked problem, choose penalties and run one of the solvers.

    The trace's cumulative operation count uses the per-iteration cost of
    the chosen algorithm under the ``threads`` model (``1`` or ``2MN``).
    """
    if algo not in ("conventional", "structured"):
        raise InvalidConfig(f"unknown algorithm {algo!r}")
    if algo == "conventional" or partition is None:
        partition = Partition.trivial(problem.nx, problem.nu)
    pp = build_stacked(problem, partition)
    rho_vec = resolve_rho(pp, rho)
    if algo == "conventional":
        eff_beta = 1.0
    else:
        eff_beta = 0.5 if beta is None else float(beta)
        check_beta(pp.M, eff_beta)
    cache = SolverCache(pp, rho_vec, eff_beta)
    mode = "conventional" if algo == "conventional" else "structured"
    counter, _ = count_iteration(pp, cache, mode)
    ops = counter.total if str(threads) == "1" else thread_partition(
        counter, pp, default_use_case(pp), "2MN").longest
    cfg = AdmmConfig(rho=tuple(rho_vec), beta=beta,
                     max_iters=max_iters, tol_primal=tol, tol_dual=tol, dist_target=dist_target)
    solver = solve_conventional if algo == "conventional" else solve_structured
    sol = solver(pp, cfg, reference=reference, cache=cache, record_trace=record_trace,
                 ops_per_iter=ops)
    return SolveResult(sol, pp, rho_vec, eff_beta, ops, algo)

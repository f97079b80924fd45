"""Benchmarks: cascade cost and convergence, complexity growth, and the
separation-tendency study."""

from __future__ import annotations

import logging
import warnings
from dataclasses import asdict, dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np
from scipy.stats import spearmanr

from .admm import AdmmConfig, SolverCache, solve_conventional, solve_structured
from .costmodel import CostReport, complexity_table, cost_report, default_use_case
from .errors import NonConvergenceWarning, OracleNotConverged
from .generate import (CATEGORIES, GenSpec, gen_cascade, gen_category, gen_fig4_chain, regulation_problem,
                       split_dims, wrap_mpc)
from .oracle import dense_kkt_solve, reference_solve
from .penalty import tune_penalties
from .problem import Partition, build_stacked
from .runner import RhoPolicy
from .structure import analyze

log = logging.getLogger(__name__)

DIST_FLOOR = 1e-14


@dataclass
class CascadeConfig:
    S: int = 20
    x_i: int = 6
    u_i: int = 1
    N: int = 5
    coupling_rank: int = 1
    system_seed: int = 0
    scenarios: int = 200
    scenario_seed: int = 1
    penalty_scale: float = 90.0
    beta: float = 0.5
    max_iters: int = 20000
    dist_floor: float = DIST_FLOOR
    budget_points: int = 80


@dataclass
class CascadeSetup:
    config: CascadeConfig
    system: object
    partition: Partition
    report: CostReport
    rho_conv: np.ndarray
    rho_struct: np.ndarray


def cascade_setup(cfg: CascadeConfig = CascadeConfig()) -> CascadeSetup:
    """Generate the cascade, tune penalties on a first scenario and count costs."""
    system, part = gen_cascade(cfg.S, cfg.x_i, cfg.u_i, cfg.coupling_rank, cfg.system_seed)
    prob = wrap_mpc(system, cfg.N, seed=cfg.scenario_seed)
    pp = build_stacked(prob, part)
    pp1 = build_stacked(prob, Partition.trivial(system.nx, system.nu))
    r1 = tune_penalties(pp1).rho * cfg.penalty_scale
    rs = tune_penalties(pp).rho * cfg.penalty_scale
    rep = cost_report(pp1, SolverCache(pp1, r1, 1.0), pp, SolverCache(pp, rs, cfg.beta))
    return CascadeSetup(cfg, system, part, rep, r1, rs)


@dataclass
class Curves:
    budgets: np.ndarray
    median: dict
    geomean: dict
    p10: dict
    p90: dict


@dataclass
class CascadeConvergence:
    setup: CascadeSetup
    histories: dict
    curves: Curves
    skipped: list = field(default_factory=list)


def _dist_at(hist, iters, floor):
    """dist after ``iters`` iterations (index 0 is the zero initial point)."""
    idx = np.minimum(iters, hist.size - 1)
    return np.maximum(hist[idx], floor)


def convergence_curves(histories, costs, floor=DIST_FLOOR, points=80):
    """Summaries of dist over equal sequential-operation budgets.

    ``histories[name]`` is a list of per-scenario arrays (dist after 0, 1, ...
    iterations) and ``costs[name]`` the per-iteration cost of that curve.
    """
    hi = max(len(h) * costs[n] for n, hs in histories.items() for h in hs)
    lo = min(costs.values())
    budgets = np.unique(np.geomspace(lo, hi, points).round())
    med, geo, p10, p90 = {}, {}, {}, {}
    for name, hs in histories.items():
        it = np.floor(budgets / costs[name]).astype(int)
        vals = np.array([_dist_at(h, it, floor) for h in hs])
        med[name] = np.median(vals, axis=0)
        geo[name] = np.exp(np.mean(np.log(vals), axis=0))
        p10[name] = np.percentile(vals, 10, axis=0)
        p90[name] = np.percentile(vals, 90, axis=0)
    return Curves(budgets, med, geo, p10, p90)


def cascade_convergence(cfg: CascadeConfig = CascadeConfig(), setup: Optional[CascadeSetup] = None,
                        progress: Optional[Callable[[int], None]] = None) -> CascadeConvergence:
    """Run (i) conventional and (ii)/(iii) structured ADMM on cascade scenarios.

    (ii) and (iii) share their iterates and differ only in the cost per
    iteration.  Every run stops once dist falls below ``dist_floor``.
    """
    setup = setup or cascade_setup(cfg)
    system, part = setup.system, setup.partition
    hist = {"i": [], "ii": []}
    skipped = []
    for j in range(cfg.scenarios):
        seed = cfg.scenario_seed + j
        prob = wrap_mpc(system, cfg.N, seed=seed)
        try:
            ref = reference_solve(prob)
        except OracleNotConverged as exc:
            skipped.append((seed, str(exc)))
            continue
        pp1 = build_stacked(prob, Partition.trivial(system.nx, system.nu))
        pp = build_stacked(prob, part)
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", NonConvergenceWarning)
            a = solve_conventional(pp1, AdmmConfig(rho=tuple(setup.rho_conv), max_iters=cfg.max_iters,
                                                   dist_target=cfg.dist_floor),
                                   reference=(ref.x, ref.u), record_trace=False)
            b = solve_structured(pp, AdmmConfig(rho=tuple(setup.rho_struct), beta=cfg.beta,
                                                max_iters=cfg.max_iters, dist_target=cfg.dist_floor),
                                 reference=(ref.x, ref.u), record_trace=False)
        hist["i"].append(np.concatenate([[1.0], a.dist_history]))
        hist["ii"].append(np.concatenate([[1.0], b.dist_history]))
        if progress:
            progress(j)
    hist["iii"] = hist["ii"]
    curves = convergence_curves(hist, setup.report.costs, cfg.dist_floor, cfg.budget_points)
    return CascadeConvergence(setup, hist, curves, skipped)


@dataclass
class GrowthRow:
    M: int
    x: int
    measured: dict
    table: dict


def growth_curves(Ms: Sequence[int] = range(1, 16), N: int = 10, seed: int = 0, beta: float = 0.5):
    """Measured per-iteration costs of the chain family next to the table orders.

    Measured keys: ``i`` conventional, ``ii`` structured single thread,
    ``iii`` structured with 2MN threads.
    """
    rows = []
    for M in Ms:
        system, part, _ = gen_fig4_chain(M, seed)
        prob = wrap_mpc(system, N, seed=seed + M)
        pp = build_stacked(prob, part)
        pp1 = build_stacked(prob, Partition.trivial(system.nx, system.nu))
        b = beta if M > 1 else 1.0
        rep = cost_report(pp1, SolverCache(pp1, [1.0], 1.0), pp, SolverCache(pp, np.ones(M), b))
        rows.append(GrowthRow(M, system.nx, rep.costs,
                              complexity_table(part.xdims, pp.decomposition.wdims, N)))
    return rows


@dataclass
class StudyConfig:
    categories: tuple = CATEGORIES
    dims: tuple = ((5, 2), (10, 4))
    seeds: int = 5
    initial_conditions: int = 5
    N: int = 5
    dist_target: float = 1e-4
    rho: str = "unit"
    max_iters: int = 100_000
    base_seed: int = 0

    def __post_init__(self):
        if not 0 < self.dist_target < 1:
            raise ValueError("dist_target must lie in (0, 1)")
        if self.seeds < 1 or self.initial_conditions < 1:
            raise ValueError("counts must be positive")
        RhoPolicy.parse(self.rho)

    def system_seed(self, cat_index, x, j):
        return self.base_seed + 1000 * cat_index + 100 * x + j


@dataclass
class StudyRow:
    category: str
    x: int
    M: int
    seed: int
    s: float
    iters_conventional: float
    iters_structured: float
    increase: float


@dataclass
class StudyResult:
    rows: list
    skipped: list
    spearman: float
    config: StudyConfig

    def metadata(self):
        d = asdict(self.config)
        d["spearman"] = self.spearman
        return d


def _rho_for(pp, policy):
    if policy.kind == "unit":
        return np.ones(pp.M)
    return tune_penalties(pp).rho * policy.scale


def study_system(system, part, cfg: StudyConfig, seed: int):
    """Geometric-mean iteration counts and increase factor for one system."""
    rng = np.random.default_rng(seed)
    policy = RhoPolicy.parse(cfg.rho)
    it_a, it_b = [], []
    for _ in range(cfg.initial_conditions):
        prob = regulation_problem(system, cfg.N, rng.standard_normal(system.nx))
        ref = dense_kkt_solve(prob)
        pp1 = build_stacked(prob, Partition.trivial(system.nx, system.nu))
        pp = build_stacked(prob, part)
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", NonConvergenceWarning)
            a = solve_conventional(pp1, AdmmConfig(rho=tuple(_rho_for(pp1, policy)), max_iters=cfg.max_iters,
                                                   dist_target=cfg.dist_target),
                                   reference=ref, record_trace=False)
            b = solve_structured(pp, AdmmConfig(rho=tuple(_rho_for(pp, policy)), beta=0.5,
                                                max_iters=cfg.max_iters, dist_target=cfg.dist_target),
                                 reference=ref, record_trace=False)
        it_a.append(a.iterations)
        it_b.append(b.iterations)
    ga = float(np.exp(np.mean(np.log(it_a))))
    gb = float(np.exp(np.mean(np.log(it_b))))
    inc = float(np.exp(np.mean(np.log(np.asarray(it_b) / np.asarray(it_a)))))
    return ga, gb, inc


def run_study(cfg: StudyConfig = StudyConfig(), progress: Optional[Callable[[StudyRow], None]] = None):
    """Scaled-down iteration-increase study over the random categories."""
    rows, skipped = [], []
    for ci, cat in enumerate(cfg.categories):
        for x, M in cfg.dims:
            for j in range(cfg.seeds):
                seed = cfg.system_seed(CATEGORIES.index(cat) if cat in CATEGORIES else ci, x, j)
                system, part = gen_category(GenSpec(cat, split_dims(x, M), (1,) * M, seed))
                _, rep = analyze(system, part)
                if rep.s is None:
                    skipped.append((cat, x, seed, "separation tendency undefined"))
                    continue
                ga, gb, inc = study_system(system, part, cfg, seed)
                row = StudyRow(cat, x, M, seed, rep.s, ga, gb, inc)
                rows.append(row)
                if progress:
                    progress(row)
    rho = float(spearmanr([r.s for r in rows], [r.increase for r in rows]).statistic) if len(rows) > 2 else float("nan")
    return StudyResult(rows, skipped, rho, cfg)

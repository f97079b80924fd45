"""Scalar operation counts per iteration and abstract thread schedules.

Counting conventions
--------------------
* one scalar multiply or division = 1 mul, one scalar add, subtract or
  comparison = 1 add; the cost of an operation is ``adds + muls``;
* products skip structural zeros: a matrix-vector product with ``M`` costs
  ``nnz(M)`` muls and ``sum_r max(nnz_r - 1, 0)`` adds;
* a unit triangular solve costs ``nnz(L)`` muls and ``nnz(L)`` adds, the
  diagonal scaling of an LDL^T solve ``n`` muls;
* precomputed vectors are free to form but adding them costs one add per
  nonzero entry;
* box clipping costs one comparison per finite bound; custom projections
  are not instrumented;
* the dual update costs two adds per component and multiplier;
* permutations, copies and memory traffic are free.

:func:`count_iteration` does not merely tally these rules: it executes one
iteration blockwise (per subsystem, stage and coupling block) with counting
kernels, so the returned state can be compared with the fast solver path.
"""

from __future__ import annotations

from collections import defaultdict
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .admm import AdmmState, SolverCache
from .errors import InvalidUseCase
from .linalg import ldl_solve_banded, lower_band_storage, matvec_ops, row_nnz
from .problem import PartitionedProblem

CONVENTIONS = ("mul=1,add=1,cmp=add,div=mul,skip_zeros=1,precomputed=free,"
               "clip=1cmp/finite_bound,dual=2add/component,memory=free")

STEP_ALIAS = {"1.1": "2.1", "1.2": "2.2", "1.3": "2.4"}
USE_CASES = ("general", "box", "out1")


class OpCounter:
    """Add/mul tallies keyed by ``(step, thread)``."""

    def __init__(self):
        self.breakdown = defaultdict(lambda: [0, 0])

    def add(self, step, thread, adds=0, muls=0):
        if adds < 0 or muls < 0:
            raise ValueError("operation counts are non-negative")
        cell = self.breakdown[(step, thread)]
        cell[0] += int(adds)
        cell[1] += int(muls)

    def matvec(self, step, thread, M):
        a, m = matvec_ops(M)
        self.add(step, thread, a, m)

    @property
    def adds(self):
        return sum(v[0] for v in self.breakdown.values())

    @property
    def muls(self):
        return sum(v[1] for v in self.breakdown.values())

    @property
    def total(self):
        return self.adds + self.muls

    def steps(self):
        out = defaultdict(lambda: [0, 0])
        for (step, _), (a, m) in self.breakdown.items():
            out[step][0] += a
            out[step][1] += m
        return {k: tuple(v) for k, v in sorted(out.items())}

    def threads(self, step):
        return {t: a + m for (s, t), (a, m) in self.breakdown.items() if s == step}


def _names(mode):
    if mode == "conventional":
        return "1.1", "1.2", None, "1.3"
    if mode == "structured":
        return "2.1", "2.2", "2.3", "2.4"
    raise ValueError(f"unknown mode {mode!r}")


def _nnz(v):
    return int(np.count_nonzero(v))


def count_iteration(pp: PartitionedProblem, cache: SolverCache, mode: str = "structured",
                    state: Optional[AdmmState] = None):
    """Execute one iteration blockwise while counting scalar operations.

    Returns
    -------
    counter : OpCounter
    new_state : AdmmState
        The iterate produced by the counted execution.
    """
    s1, s2, s3, s4 = _names(mode)
    if mode == "conventional" and (pp.M != 1 or cache.beta != 1.0):
        raise ValueError("conventional counting needs M = 1 and a beta = 1 cache")
    beta = cache.beta
    use_eps = beta < 1.0
    n = pp.ny
    if state is None:
        state = AdmmState.zeros(n, with_eps=use_eps)
    zeta, lz = state.zeta, state.lambda_zeta
    eps, le = state.eps, state.lambda_eps
    ctr = OpCounter()
    y = np.empty(n)

    # step 2.1: per-subsystem closed form
    for s, ops in zip(pp.subsystems, cache.subsystems):
        i, sl = s.index, slice(s.offset, s.offset + s.ny)
        if use_eps:
            g = beta * (zeta[sl] + lz[sl]) + (1.0 - beta) * (eps[sl] + le[sl]) + ops.mq
            ctr.add(s1, i, adds=3 * s.ny + _nnz(ops.mq), muls=2 * s.ny)
        else:
            g = zeta[sl] + lz[sl] + ops.mq
            ctr.add(s1, i, adds=s.ny + _nnz(ops.mq))
        v = ops.P @ g
        ctr.matvec(s1, i, ops.P)
        t = ops.C @ v
        ctr.matvec(s1, i, ops.C)
        nl = ops.L.nnz
        ab = lower_band_storage(ops.L.toarray() + np.eye(ops.L.shape[0]), ops.band)
        z = ldl_solve_banded(ab, ops.band, ops.dinv, t)
        ctr.add(s1, i, adds=2 * nl, muls=2 * nl + t.size)
        hz = ops.H @ z
        ctr.matvec(s1, i, ops.H)
        y[sl] = v - hz + ops.Nc
        ctr.add(s1, i, adds=_nnz(row_nnz(ops.H)) + _nnz(ops.Nc))

    # step 2.2: projection per subsystem, stage and part
    new_zeta = np.empty(n)
    for s in pp.subsystems:
        i = s.index
        diff = y[s.offset:s.offset + s.ny] - lz[s.offset:s.offset + s.ny]
        zi = s.project(diff)
        new_zeta[s.offset:s.offset + s.ny] = zi
        for k in range(s.N):
            for part, idx in (("u", np.concatenate([s.u_index(k), s.w_index(k)])), ("x", s.x_index(k))):
                if idx.size == 0:
                    continue
                cmp = 0
                if s.is_box:
                    cmp = int(np.isfinite(s.lower[idx]).sum() + np.isfinite(s.upper[idx]).sum())
                ctr.add(s2, (i, k, part), adds=idx.size + cmp)

    # step 2.3: coupling projection per time block and coupling block
    new_eps = np.zeros(0)
    if use_eps:
        zin = y - le
        new_eps = zin.copy()
        owner = np.empty(n, dtype=int)
        tblock = np.empty(n, dtype=int)
        for s in pp.subsystems:
            owner[s.offset:s.offset + s.ny] = s.index
        for k, idx in enumerate(pp.time_blocks):
            tblock[idx] = k
        covered = np.zeros(n, dtype=bool)
        counts = defaultdict(int)
        for c, b in enumerate(cache.coupling):
            key = (b.time, c)
            zc = zin[b.vars]
            tc = b.Dc @ zc
            ctr.matvec(s3, key, b.Dc)
            corr = b.Gc @ tc
            ctr.matvec(s3, key, b.Gc)
            new_eps[b.vars] = zc - corr + b.offset
            ctr.add(s3, key, adds=b.vars.size + _nnz(row_nnz(b.Gc)) + _nnz(b.offset))
            covered[b.vars] = True
        for j in np.nonzero(~covered)[0]:
            counts[(int(tblock[j]), "free", int(owner[j]))] += 1
        for key, cnt in counts.items():
            ctr.add(s3, key, adds=cnt)

    # step 2.4: dual updates
    new_lz = lz - (y - new_zeta)
    new_le = le - (y - new_eps) if use_eps else np.zeros(0)
    for s in pp.subsystems:
        for k in range(s.N):
            ctr.add(s4, (s.index, k, "zeta"), adds=2 * s.stage)
            if use_eps:
                ctr.add(s4, (s.index, k, "eps"), adds=2 * s.stage)

    return ctr, AdmmState(y, new_zeta, new_eps, new_lz, new_le, state.iter + 1)


@dataclass
class ThreadPlan:
    use_case: str
    thread_count: str
    per_thread: dict
    longest: int
    critical_path: dict = field(default_factory=dict)


def _group(step, key, use_case):
    """Thread a counted block belongs to under ``use_case``."""
    if step == "2.2" and use_case in ("box", "out1"):
        return key[:2]
    if step == "2.3" and use_case != "out1":
        return key[0]
    return key


def check_use_case(pp: PartitionedProblem, use_case: str):
    if use_case not in USE_CASES:
        raise InvalidUseCase(f"unknown use case {use_case!r}")
    if use_case in ("box", "out1") and not all(s.is_box for s in pp.subsystems):
        raise InvalidUseCase(f"use case {use_case!r} needs box or unbounded sets")
    if use_case == "out1" and not pp.decomposition.out1:
        raise InvalidUseCase("the decomposition is not out-1")


def thread_partition(counter: OpCounter, pp: PartitionedProblem, use_case: str = "general",
                     threads="2MN") -> ThreadPlan:
    """Longest-thread cost of one iteration under an abstract schedule.

    With one thread the longest thread is the total.  With ``2MN`` threads
    the critical path is step 2.1, then the slower of 2.2 and 2.3 (which run
    concurrently), then 2.4.
    """
    check_use_case(pp, use_case)
    threads = str(threads)
    if threads not in ("1", "2MN"):
        raise InvalidUseCase("threads must be 1 or 2MN")
    if threads == "1":
        return ThreadPlan(use_case, threads, {"all": counter.total}, counter.total,
                          {s: a + m for s, (a, m) in counter.steps().items()})
    per = defaultdict(int)
    for (step, key), (a, m) in counter.breakdown.items():
        st = STEP_ALIAS.get(step, step)
        per[(st, _group(st, key, use_case))] += a + m
    best = defaultdict(int)
    for (st, _), c in per.items():
        best[st] = max(best[st], c)
    longest = best["2.1"] + max(best["2.2"], best["2.3"]) + best["2.4"]
    return ThreadPlan(use_case, threads, dict(per), int(longest), dict(best))


@dataclass
class CostReport:
    """Per-iteration cost of (i) conventional, (ii) structured single thread
    and (iii) structured with 2MN threads."""

    costs: dict
    use_case: str
    conventions: str = CONVENTIONS

    @property
    def ratios(self):
        base = self.costs["i"]
        return {k: v / base for k, v in self.costs.items()}

    def rows(self):
        labels = {"i": ("conventional", "1"), "ii": ("structured", "1"), "iii": ("structured", "2MN")}
        r = self.ratios
        return [(k, *labels[k], self.costs[k], r[k]) for k in ("i", "ii", "iii")]


def default_use_case(pp: PartitionedProblem):
    box = all(s.is_box for s in pp.subsystems)
    if box and pp.decomposition.out1:
        return "out1"
    return "box" if box else "general"


def cost_report(pp_conv: PartitionedProblem, cache_conv: SolverCache, pp: PartitionedProblem,
                cache: SolverCache, use_case: Optional[str] = None) -> CostReport:
    use_case = use_case or default_use_case(pp)
    c1, _ = count_iteration(pp_conv, cache_conv, "conventional")
    c2, _ = count_iteration(pp, cache, "structured")
    plan = thread_partition(c2, pp, use_case, "2MN")
    return CostReport({"i": c1.total, "ii": c2.total, "iii": plan.longest}, use_case)


def complexity_table(xdims, wdims, N: int, M: Optional[int] = None):
    """The five per-iteration complexity orders with unit constants.

    Rows: ``#1`` conventional, ``#2``/``#3`` box with one/2MN threads,
    ``#4``/``#5`` box and out-1 with one/2MN threads.
    """
    xdims = list(xdims)
    wdims = list(wdims) or [0]
    M = len(xdims) if M is None else int(M)
    x, w = sum(xdims), sum(wdims)
    mx, mw = max(xdims), max(wdims)
    return {
        "#1": N * x * x + N * x,
        "#2": N * (M * mx * mx + M * mx + w * w),
        "#3": N * mx * mx + max(mx, w * w),
        "#4": M * N * (mx * mx + mx + mw * mw),
        "#5": N * mx * mx + max(mx, mw * mw),
    }

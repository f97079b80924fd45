"""Self-contained reference solutions and KKT checks for MPC problems."""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
from scipy.optimize import lsq_linear

from .admm import AdmmConfig, Solution, solve_conventional
from .errors import NonConvergenceWarning, NotPositiveDefinite, OracleNotConverged
from .penalty import null_space_basis, optimal_rho
from .problem import MpcProblem, Partition, build_stacked

ORACLE_TOL = 1e-10
ORACLE_MAX_ITERS = 200_000
KKT_TOL = 1e-7


@dataclass
class Reference:
    x: np.ndarray
    u: np.ndarray
    kkt_residual: float
    iterations: int


def _stacked(problem):
    return build_stacked(problem, Partition.trivial(problem.nx, problem.nu))


def kkt_residual(problem: MpcProblem, x, u, active_tol: float = 1e-7) -> float:
    """Infinity-norm KKT residual of a candidate trajectory.

    Multipliers for the dynamics are free; bound multipliers exist only for
    components within ``active_tol`` of a bound and carry the sign that
    pushes the iterate back inside.  They are fitted by bounded least
    squares, so the result is the smallest stationarity violation over all
    admissible multipliers, combined with primal feasibility.
    """
    pp = _stacked(problem)
    s = pp.subsystems[0]
    y = pp.lift(x, u)
    grad = s.Qcal @ y + s.q
    lo, hi = s.lower, s.upper
    at_lo = np.nonzero(np.abs(y - lo) <= active_tol)[0]
    at_hi = np.nonzero(np.abs(y - hi) <= active_tol)[0]
    n = y.size
    cols = [s.C.T]
    lb = [np.full(s.C.shape[0], -np.inf)]
    ub = [np.full(s.C.shape[0], np.inf)]
    for idx, sign in ((at_lo, -1.0), (at_hi, 1.0)):
        E = np.zeros((n, idx.size))
        E[idx, np.arange(idx.size)] = sign
        cols.append(E)
        lb.append(np.zeros(idx.size))
        ub.append(np.full(idx.size, np.inf))
    K = np.hstack(cols)
    if K.shape[1]:
        res = lsq_linear(K, -grad, bounds=(np.concatenate(lb), np.concatenate(ub)),
                         method="bvls", tol=1e-14, lsmr_tol="auto")
        stat = grad + K @ res.x
    else:
        stat = grad
    prim = np.max(np.abs(s.C @ y - s.c), initial=0.0)
    box = np.max(np.maximum(np.maximum(lo - y, y - hi), 0.0), initial=0.0)
    return float(max(np.max(np.abs(stat), initial=0.0), prim, box))


def dense_kkt_solve(problem: MpcProblem):
    """Exact solution of the problem without its constraint sets (dense KKT)."""
    pp = _stacked(problem)
    s = pp.subsystems[0]
    n, m = s.Qcal.shape[0], s.C.shape[0]
    K = np.block([[s.Qcal, s.C.T], [s.C, np.zeros((m, m))]])
    sol = np.linalg.solve(K, np.concatenate([-s.q, s.c]))
    return pp.extract(sol[:n])


def reference_solve(problem: MpcProblem, tol: float = ORACLE_TOL, max_iters: int = ORACLE_MAX_ITERS,
                    kkt_tol: float = KKT_TOL) -> Reference:
    """High-accuracy solution by conventional ADMM, validated by the KKT residual.

    Raises
    ------
    OracleNotConverged
        When the residual tolerance is not met within ``max_iters`` or the
        KKT check fails.
    """
    pp = _stacked(problem)
    s = pp.subsystems[0]
    try:
        rho = optimal_rho(s.Qcal, null_space_basis(s.C))
    except NotPositiveDefinite:
        rho = 1.0
    cfg = AdmmConfig(rho=(rho,), max_iters=max_iters, tol_primal=tol, tol_dual=tol)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", NonConvergenceWarning)
        sol: Solution = solve_conventional(pp, cfg, record_trace=False)
    if not sol.converged:
        raise OracleNotConverged(f"reference solve stopped after {sol.iterations} iterations")
    x, u = sol.x, sol.u
    r = kkt_residual(problem, x, u)
    if not r <= kkt_tol:
        raise OracleNotConverged(f"KKT residual {r:.3e} exceeds {kkt_tol:.1e}")
    return Reference(x, u, r, sol.iterations)

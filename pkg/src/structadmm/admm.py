"""Conventional and structure-exploiting ADMM for the stacked MPC problem.

Both solvers share :class:`SolverCache`, which holds the per-subsystem
operators of the closed-form dynamics step

    y_i = M_i g_i + N_i c_i,   M_i = (I - N_i C_i) P_i,
    N_i = P_i C_i^T (C_i P_i C_i^T)^{-1},   P_i = rho_i (Qcal_i + rho_i I)^{-1},

realized as ``y_i = v - H_i S_i^{-1} C_i v + N_i c_i`` with ``v = P_i g_i``,
``H_i = P_i C_i^T`` and a banded LDL^T factorization of ``S_i``.  The
coupling projection is precomputed per connected block of ``D`` in
time-sorted coordinates.
"""

from __future__ import annotations

import logging
import warnings
from dataclasses import dataclass, field
from typing import Callable, NamedTuple, Optional, Sequence

import numpy as np
import scipy.sparse as sp
from scipy.sparse.csgraph import connected_components

from .errors import (BetaIgnoredWarning, InvalidBeta, InvalidConfig, NonConvergenceWarning,
                     SingularCoupling, ZeroReference)
from .linalg import (block_diag_sparse, bandwidth, ldl_banded, ldl_solve_banded,
                     lower_band_storage, sparse_from_dense)
from .problem import ConstraintSet, PartitionedProblem

log = logging.getLogger(__name__)

SINGULAR_COND = 1e12


@dataclass(frozen=True)
class AdmmConfig:
    """Solver parameters.

    ``rho`` holds one penalty per subsystem (a single value is broadcast).
    ``beta=None`` means the default of 0.5 for the structured solver.
    When ``dist_target`` is set and a reference is passed to the solver,
    iteration stops once ``dist <= dist_target`` instead of on residuals.
    """

    rho: tuple = (1.0,)
    beta: Optional[float] = None
    max_iters: int = 20000
    tol_primal: float = 1e-8
    tol_dual: float = 1e-8
    penalty_scale: float = 1.0
    dist_target: Optional[float] = None

    def __post_init__(self):
        rho = np.atleast_1d(np.asarray(self.rho, dtype=float))
        if rho.size == 0 or np.any(~(rho > 0)) or not np.all(np.isfinite(rho)):
            raise InvalidConfig("penalty parameters must be positive and finite")
        if not self.penalty_scale > 0:
            raise InvalidConfig("penalty_scale must be positive")
        if self.beta is not None and not 0.0 < self.beta <= 1.0:
            raise InvalidBeta("beta must lie in (0, 1]")
        if self.max_iters < 1:
            raise InvalidConfig("max_iters must be at least 1")
        object.__setattr__(self, "rho", tuple(float(r) for r in rho))

    def rho_vector(self, M):
        rho = np.asarray(self.rho)
        if rho.size == 1:
            rho = np.full(M, rho[0])
        if rho.size != M:
            raise InvalidConfig(f"expected {M} penalty parameters, got {rho.size}")
        return rho * self.penalty_scale

    @property
    def effective_beta(self):
        return 0.5 if self.beta is None else float(self.beta)


@dataclass
class SubsystemOps:
    rho: float
    P: sp.csr_matrix
    C: sp.csr_matrix
    H: sp.csr_matrix
    L: sp.csr_matrix          # strictly lower part of the unit LDL^T factor
    dinv: np.ndarray
    band: int
    Nc: np.ndarray
    mq: np.ndarray            # -q_i / rho_i


@dataclass
class CouplingBlock:
    """One independent block of the coupling projection at a time step."""

    time: int
    rows: np.ndarray
    vars: np.ndarray
    Dc: np.ndarray
    Gc: np.ndarray
    offset: np.ndarray
    owners: tuple


class SolverCache:
    """Precomputed operators for a fixed (rho_i, beta) pair.

    Construction performs all factorizations; iterations only apply them.
    """

    def __init__(self, pp: PartitionedProblem, rho, beta: float = 1.0):
        rho = np.broadcast_to(np.asarray(rho, dtype=float), (pp.M,)).copy()
        self.pp = pp
        self.rho = rho
        self.beta = float(beta)
        self.subsystems = [self._subsystem_ops(s, r) for s, r in zip(pp.subsystems, rho)]
        self.rho_full = np.concatenate([np.full(s.ny, r) for s, r in zip(pp.subsystems, rho)])

        ops = self.subsystems
        self.P = block_diag_sparse([o.P for o in ops])
        self.C = block_diag_sparse([o.C for o in ops])
        self.H = block_diag_sparse([o.H for o in ops])
        self.band = max((o.band for o in ops), default=0)
        Lall = block_diag_sparse([o.L for o in ops]).toarray() + np.eye(self.C.shape[0])
        self.L_band = lower_band_storage(Lall, self.band)
        self.dinv = np.concatenate([o.dinv for o in ops])
        self.Nc = np.concatenate([o.Nc for o in ops])
        self.mq = np.concatenate([o.mq for o in ops])
        self.lower = np.concatenate([s.lower for s in pp.subsystems])
        self.upper = np.concatenate([s.upper for s in pp.subsystems])
        self.all_box = all(s.is_box for s in pp.subsystems)

        self.coupling = self._coupling_blocks() if beta < 1.0 else []
        self._assemble_coupling()

    @staticmethod
    def _subsystem_ops(s, rho):
        n = s.stage
        Pblocks = []
        stage_q = s.Qcal[:n, :n]
        Pstage = rho * np.linalg.inv(stage_q + rho * np.eye(n))
        Pstage[np.abs(Pstage) < 1e-300] = 0.0
        # exact structural zeros: off-block entries of a block-diagonal inverse
        mask = (stage_q != 0) | np.eye(n, dtype=bool)
        mask = _closure(mask)
        Pstage = np.where(mask, Pstage, 0.0)
        Pblocks = [Pstage] * s.N
        P = sp.block_diag(Pblocks, format="csr")
        P.eliminate_zeros()
        C = sparse_from_dense(s.C)
        H = (P @ C.T).tocsr()
        H.eliminate_zeros()
        S = (C @ H).toarray()
        S = 0.5 * (S + S.T)
        band = bandwidth(S)
        L, d = ldl_banded(S, band)
        Lstrict = sparse_from_dense(np.tril(L, -1))
        dinv = 1.0 / d
        Nc = H @ ldl_solve_banded(lower_band_storage(L, band), band, dinv, s.c)
        mq = -s.q / rho
        return SubsystemOps(rho, P, C, H, Lstrict, dinv, band, Nc, mq)

    def _coupling_blocks(self):
        pp = self.pp
        D = pp.D
        blocks = []
        if D.shape[0] == 0:
            return blocks
        e = (1.0 - self.beta) * self.rho_full
        absD = abs(D)
        for k in range(pp.N):
            rows = np.nonzero(pp.coupling_time == k)[0]
            if rows.size == 0:
                continue
            Dk = absD[rows]
            adj = (Dk @ Dk.T).tocsr()
            ncomp, labels = connected_components(adj, directed=False)
            for c in range(ncomp):
                r = rows[labels == c]
                sub = D[r]
                v = np.unique(sub.indices)
                Dc = sub[:, v].toarray()
                einv = 1.0 / e[v]
                Sc = (Dc * einv) @ Dc.T
                if np.linalg.cond(Sc) > SINGULAR_COND:
                    raise SingularCoupling(f"coupling block at time {k} is numerically singular")
                Gc = (einv[:, None] * Dc.T) @ np.linalg.inv(Sc)
                Gc[Dc.T.any(axis=1) == 0] = 0.0
                owners = tuple(sorted(set(pp.coupling_owner[r].tolist())))
                blocks.append(CouplingBlock(k, r, v, Dc, Gc, Gc @ pp.d[r], owners))
        return blocks

    def _assemble_coupling(self):
        ny = self.pp.ny
        nrows = self.pp.D.shape[0]
        rr, cc, vv = [], [], []
        off = np.zeros(ny)
        for b in self.coupling:
            gr, gc = np.nonzero(b.Gc)
            rr.append(b.vars[gr])
            cc.append(b.rows[gc])
            vv.append(b.Gc[gr, gc])
            off[b.vars] += b.offset
        if rr:
            self.G = sp.csr_matrix((np.concatenate(vv), (np.concatenate(rr), np.concatenate(cc))),
                                   shape=(ny, nrows))
        else:
            self.G = sp.csr_matrix((ny, nrows))
        self.coupling_offset = off

    # -- algorithm steps -------------------------------------------------

    def dynamics_step(self, g):
        """Closed-form solution of the equality-constrained step for all subsystems."""
        v = self.P @ g
        t = self.C @ v
        z = ldl_solve_banded(self.L_band, self.band, self.dinv, t)
        return v - self.H @ z + self.Nc

    def project(self, z):
        if self.all_box:
            return np.minimum(np.maximum(z, self.lower), self.upper)
        out = np.empty_like(z)
        for s in self.pp.subsystems:
            sl = slice(s.offset, s.offset + s.ny)
            out[sl] = s.project(z[sl])
        return out

    def couple(self, z):
        if self.pp.D.shape[0] == 0:
            return z.copy()
        return z - self.G @ (self.pp.D @ z) + self.coupling_offset


def _closure(mask):
    """Block structure reachable through the nonzero pattern (inverse fill)."""
    n = mask.shape[0]
    ncomp, labels = connected_components(sp.csr_matrix(mask), directed=False)
    return labels[:, None] == labels[None, :]


class AdmmState(NamedTuple):
    y: np.ndarray
    zeta: np.ndarray
    eps: np.ndarray
    lambda_zeta: np.ndarray
    lambda_eps: np.ndarray
    iter: int = 0

    @classmethod
    def zeros(cls, n, with_eps=True):
        z = np.zeros(n)
        e = np.zeros(n) if with_eps else np.zeros(0)
        return cls(z.copy(), z.copy(), e.copy(), z.copy(), e.copy(), 0)


class IterTrace(NamedTuple):
    iter: int
    r_zeta: float
    r_eps: float
    objective: float
    dist: float
    cum_ops: int


@dataclass
class Solution:
    """Result of an ADMM run.

    ``x`` holds the predicted states x^2..x^{N+1} (shape (N, nx)), ``u`` the
    inputs u^1..u^N.
    """

    x: np.ndarray
    u: np.ndarray
    state: AdmmState
    iterations: int
    converged: bool
    status: str
    trace: list = field(default_factory=list)
    dist_history: Optional[np.ndarray] = None


def project_box(z, cset: ConstraintSet):
    """Element-wise median(lower, z, upper); identity for unbounded sets."""
    if cset.kind == "custom":
        raise ValueError("project_box needs a box or unbounded set")
    return cset.project(z)


def coupling_projection(v, cache: SolverCache):
    """E_eps-weighted projection of ``v`` onto ``{eps : D eps = d}``."""
    return cache.couple(np.asarray(v, dtype=float))


def dist(x, u, xref, uref):
    """Squared distance of (x, u) to the reference, relative to its squared norm."""
    ref = np.concatenate([np.ravel(xref), np.ravel(uref)])
    nrm = float(ref @ ref)
    if nrm == 0.0:
        raise ZeroReference("reference trajectory is zero")
    e = np.concatenate([np.ravel(x), np.ravel(u)]) - ref
    return float(e @ e) / nrm


def _reference_vector(pp, reference):
    if reference is None:
        return None
    x, u = (reference.x, reference.u) if isinstance(reference, Solution) else reference
    ref = np.concatenate([np.ravel(x), np.ravel(u)])
    if not ref @ ref > 0:
        raise ZeroReference("reference trajectory is zero")
    return ref


def _xu_vector(pp, y):
    x, u = pp.extract(y)
    return np.concatenate([x.ravel(), u.ravel()])


def solve_conventional(pp: PartitionedProblem, cfg: AdmmConfig, init: Optional[AdmmState] = None,
                       *, reference=None, cache: Optional[SolverCache] = None,
                       record_trace: bool = True, ops_per_iter: int = 0,
                       callback: Optional[Callable] = None) -> Solution:
    """Conventional ADMM on the unpartitioned (M = 1) problem.

    Each iteration: y from the dynamics-constrained QP (step 1.1), zeta by
    projection onto Y (1.2), scaled dual ascent (1.3).
    """
    if pp.M != 1:
        raise InvalidConfig("conventional ADMM needs the trivial partition (M = 1)")
    if cfg.beta is not None and cfg.beta != 1.0:
        warnings.warn("beta is ignored by conventional ADMM", BetaIgnoredWarning, stacklevel=2)
    rho = float(cfg.rho_vector(1)[0])
    if cache is None:
        cache = SolverCache(pp, [rho], beta=1.0)
    n = pp.ny
    st = init if init is not None else AdmmState.zeros(n, with_eps=False)
    zeta, lam = st.zeta.copy(), st.lambda_zeta.copy()
    y = st.y.copy()
    ref = _reference_vector(pp, reference)
    trace, dists = [], []
    converged, status, it = False, "max_iters", 0
    for it in range(1, cfg.max_iters + 1):
        y = cache.dynamics_step(zeta + lam + cache.mq)
        zeta_old = zeta
        zeta = cache.project(y - lam)
        lam = lam - (y - zeta)

        r_p = float(np.linalg.norm(y - zeta))
        r_d = rho * float(np.linalg.norm(zeta - zeta_old))
        dv = np.nan
        if ref is not None:
            e = _xu_vector(pp, y) - ref
            dv = float(e @ e) / float(ref @ ref)
            dists.append(dv)
        if record_trace:
            trace.append(IterTrace(it, r_p, 0.0, pp.objective(y), dv, it * ops_per_iter))
        if callback is not None:
            callback(AdmmState(y, zeta, np.zeros(0), lam, np.zeros(0), it))
        if _done(cfg, ref, dv, r_p, 0.0, r_d):
            converged, status = True, "converged"
            break
    return _finish(pp, y, AdmmState(y, zeta, np.zeros(0), lam, np.zeros(0), it), it, converged,
                   status, trace, dists)


def check_beta(M, beta):
    if not 0.0 < beta <= 1.0:
        raise InvalidBeta("beta must lie in (0, 1]")
    if M > 1 and beta == 1.0:
        raise InvalidBeta("beta = 1 with M > 1 solves the problem without the coupling constraint")


def solve_structured(pp: PartitionedProblem, cfg: AdmmConfig, init: Optional[AdmmState] = None,
                     *, reference=None, cache: Optional[SolverCache] = None,
                     record_trace: bool = True, ops_per_iter: int = 0,
                     callback: Optional[Callable] = None) -> Solution:
    """Structure-exploiting ADMM.

    Per iteration: per-subsystem closed-form QP (step 2.1), per-subsystem
    projection onto Y_i (2.2), weighted projection onto ``D eps = d`` (2.3)
    and dual updates (2.4).  With ``beta = 1`` (only valid for M = 1) the
    eps copy drops out and the iterates coincide with conventional ADMM.
    """
    beta = cfg.effective_beta
    check_beta(pp.M, beta)
    rho = cfg.rho_vector(pp.M)
    if cache is None:
        cache = SolverCache(pp, rho, beta=beta)
    n = pp.ny
    use_eps = beta < 1.0
    st = init if init is not None else AdmmState.zeros(n, with_eps=use_eps)
    y, zeta, lz = st.y.copy(), st.zeta.copy(), st.lambda_zeta.copy()
    eps = st.eps.copy() if use_eps else np.zeros(0)
    le = st.lambda_eps.copy() if use_eps else np.zeros(0)
    rho_full = cache.rho_full
    ref = _reference_vector(pp, reference)
    trace, dists = [], []
    converged, status, it = False, "max_iters", 0
    for it in range(1, cfg.max_iters + 1):
        if use_eps:
            g = beta * (zeta + lz) + (1.0 - beta) * (eps + le) + cache.mq
        else:
            g = zeta + lz + cache.mq
        y = cache.dynamics_step(g)
        zeta_old = zeta
        zeta = cache.project(y - lz)
        lz = lz - (y - zeta)
        r_z = float(np.linalg.norm(y - zeta))
        r_e = 0.0
        if use_eps:
            eps_old = eps
            eps = cache.couple(y - le)
            le = le - (y - eps)
            r_e = float(np.linalg.norm(y - eps))
            r_d = float(np.linalg.norm(rho_full * (beta * (zeta - zeta_old) + (1.0 - beta) * (eps - eps_old))))
        else:
            r_d = float(np.linalg.norm(rho_full * (zeta - zeta_old)))

        dv = np.nan
        if ref is not None:
            e = _xu_vector(pp, y) - ref
            dv = float(e @ e) / float(ref @ ref)
            dists.append(dv)
        if record_trace:
            trace.append(IterTrace(it, r_z, r_e, pp.objective(y), dv, it * ops_per_iter))
        if callback is not None:
            callback(AdmmState(y, zeta, eps, lz, le, it))
        if _done(cfg, ref, dv, r_z, r_e, r_d):
            converged, status = True, "converged"
            break
    return _finish(pp, y, AdmmState(y, zeta, eps, lz, le, it), it, converged, status, trace, dists)


def _done(cfg, ref, dv, r_p, r_e, r_d):
    if cfg.dist_target is not None and ref is not None:
        return dv <= cfg.dist_target
    return r_p <= cfg.tol_primal and r_e <= cfg.tol_primal and r_d <= cfg.tol_dual


def _finish(pp, y, state, it, converged, status, trace, dists):
    if not converged:
        warnings.warn(f"ADMM stopped after {it} iterations without meeting the tolerance",
                      NonConvergenceWarning, stacklevel=3)
    x, u = pp.extract(y)
    return Solution(x, u, state, it, converged, status, trace,
                    np.asarray(dists) if dists else None)


def trace_rows(trace: Sequence[IterTrace]):
    """Rows for CSV export (iter, r_zeta, r_eps, objective, dist, cum_ops)."""
    return [tuple(t) for t in trace]

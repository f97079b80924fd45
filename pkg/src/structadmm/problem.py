"""MPC problem model, partitions, virtual-subsystem decomposition and the
stacked per-subsystem QP used by the ADMM solvers.

Variable layout
---------------
For subsystem ``i`` the stacked vector is ``y_i = [y_i^1; ...; y_i^N]`` with
stage blocks ``y_i^k = [u_i^k; w_i^k; x_i^{k+1}]``.  The global vector is
``y = [y_1; ...; y_M]``.  Reference rows ``r_x[k-1]`` pair with ``x^{k+1}``
and ``r_u[k-1]`` with ``u^k``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np
import scipy.sparse as sp

from .errors import DimensionMismatch, NotAdmissible

SYMMETRY_RTOL = 1e-12
PSD_TOL = -1e-10
BLOCK_DIAG_RTOL = 1e-12
DEFAULT_RANK_TOL = 1e-10


def _frozen(a, ndim=None, name="array"):
    arr = np.array(a, dtype=float)
    if ndim == 2 and arr.ndim == 1 and arr.size == 0:
        arr = arr.reshape(0, 0)
    if ndim is not None and arr.ndim != ndim:
        raise DimensionMismatch(f"{name} must have {ndim} dimensions, got {arr.ndim}")
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class LtiSystem:
    """Discrete-time LTI system ``x+ = A x + B u``."""

    A: np.ndarray
    B: np.ndarray

    def __post_init__(self):
        A = _frozen(self.A, 2, "A")
        B = np.array(self.B, dtype=float)
        if B.ndim == 1:
            B = B.reshape(-1, 1) if B.size else np.zeros((A.shape[0], 0))
        B = _frozen(B, 2, "B")
        if A.shape[0] < 1 or A.shape[0] != A.shape[1]:
            raise DimensionMismatch(f"A must be square and non-empty, got {A.shape}")
        if B.shape[0] != A.shape[0]:
            raise DimensionMismatch(f"B must have {A.shape[0]} rows, got {B.shape[0]}")
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "B", B)

    @property
    def nx(self) -> int:
        return self.A.shape[0]

    @property
    def nu(self) -> int:
        return self.B.shape[1]


@dataclass(frozen=True)
class ConstraintSet:
    """A projectable convex set for one stage vector.

    ``kind`` is ``"unbounded"``, ``"box"`` or ``"custom"``.  Custom sets carry
    a projection callback and, to be usable with a partition, a tuple of
    per-subsystem ``factors`` whose dimensions follow the partition.
    """

    kind: str
    dim: int
    lower: Optional[np.ndarray] = None
    upper: Optional[np.ndarray] = None
    projection: Optional[Callable[[np.ndarray], np.ndarray]] = field(default=None, compare=False)
    factors: Optional[tuple] = None

    def __post_init__(self):
        if self.kind not in ("unbounded", "box", "custom"):
            raise ValueError(f"unknown constraint kind {self.kind!r}")
        if self.kind == "box":
            lo = _frozen(self.lower, 1, "lower")
            hi = _frozen(self.upper, 1, "upper")
            if lo.shape != (self.dim,) or hi.shape != (self.dim,):
                raise DimensionMismatch("box bounds must match the set dimension")
            if np.any(np.isnan(lo)) or np.any(np.isnan(hi)) or np.any(lo > hi):
                raise ValueError("box bounds require lower <= upper element-wise")
            object.__setattr__(self, "lower", lo)
            object.__setattr__(self, "upper", hi)
        if self.kind == "custom" and self.projection is None:
            raise ValueError("custom constraint sets need a projection callback")

    @classmethod
    def unbounded(cls, dim):
        return cls("unbounded", int(dim))

    @classmethod
    def box(cls, lower, upper):
        lower = np.atleast_1d(np.asarray(lower, dtype=float))
        upper = np.atleast_1d(np.asarray(upper, dtype=float))
        return cls("box", lower.size, lower=lower, upper=upper)

    @classmethod
    def custom(cls, projection, dim, factors=None):
        return cls("custom", int(dim), projection=projection,
                   factors=None if factors is None else tuple(factors))

    def bounds(self):
        """Lower/upper arrays; infinite for unbounded sets, None for custom sets."""
        if self.kind == "box":
            return self.lower, self.upper
        if self.kind == "unbounded":
            return np.full(self.dim, -np.inf), np.full(self.dim, np.inf)
        return None

    def project(self, z):
        z = np.asarray(z, dtype=float)
        if self.kind == "unbounded":
            return z.copy()
        if self.kind == "box":
            return np.minimum(np.maximum(z, self.lower), self.upper)
        return np.asarray(self.projection(z), dtype=float)

    def contains(self, z, tol=0.0):
        z = np.asarray(z, dtype=float)
        if self.kind == "unbounded":
            return True
        if self.kind == "box":
            return bool(np.all(z >= self.lower - tol) and np.all(z <= self.upper + tol))
        return bool(np.max(np.abs(self.project(z) - z), initial=0.0) <= tol)

    def split(self, sizes):
        """Per-subsystem factors for the given block sizes.

        Raises NotAdmissible when a custom set does not declare matching factors.
        """
        sizes = [int(s) for s in sizes]
        if sum(sizes) != self.dim:
            raise DimensionMismatch("block sizes do not add up to the set dimension")
        offs = np.cumsum([0] + sizes)
        if self.kind == "unbounded":
            return [ConstraintSet.unbounded(s) for s in sizes]
        if self.kind == "box":
            return [ConstraintSet.box(self.lower[a:b], self.upper[a:b])
                    for a, b in zip(offs[:-1], offs[1:])]
        if len(sizes) == 1:
            return [self]
        if self.factors is None or [f.dim for f in self.factors] != sizes:
            raise NotAdmissible("custom constraint set is not declared separable for this partition",
                                [f"custom set of dim {self.dim} lacks factors for sizes {sizes}"])
        return list(self.factors)


@dataclass(frozen=True)
class MpcProblem:
    """Horizon-N tracking MPC problem over an LTI system with stage constraints."""

    system: LtiSystem
    N: int
    Q: np.ndarray
    R: np.ndarray
    r_x: np.ndarray
    r_u: np.ndarray
    x1: np.ndarray
    Xset: Optional[ConstraintSet] = None
    Uset: Optional[ConstraintSet] = None

    def __post_init__(self):
        nx, nu, N = self.system.nx, self.system.nu, int(self.N)
        if N < 1:
            raise DimensionMismatch("horizon N must be positive")
        object.__setattr__(self, "N", N)
        Q = _frozen(self.Q, 2, "Q")
        R = _frozen(np.asarray(self.R, dtype=float).reshape(nu, nu), 2, "R")
        if Q.shape != (nx, nx):
            raise DimensionMismatch(f"Q must be {nx}x{nx}")
        for name, M in (("Q", Q), ("R", R)):
            if M.size == 0:
                continue
            scale = max(np.max(np.abs(M)), 1.0)
            if np.max(np.abs(M - M.T)) > SYMMETRY_RTOL * scale:
                raise ValueError(f"{name} is not symmetric")
            if np.min(np.linalg.eigvalsh(M)) < PSD_TOL * scale:
                raise ValueError(f"{name} is not positive semidefinite")
        r_x = _frozen(np.asarray(self.r_x, dtype=float).reshape(-1, nx), 2, "r_x")
        r_u = np.asarray(self.r_u, dtype=float)
        r_u = _frozen(np.zeros((N, 0)) if nu == 0 else r_u.reshape(-1, nu), 2, "r_u")
        if r_x.shape[0] != N or r_u.shape[0] != N:
            raise DimensionMismatch("reference sequences must have length N")
        x1 = _frozen(self.x1, 1, "x1")
        if x1.shape != (nx,):
            raise DimensionMismatch("x1 must have nx entries")
        Xset = self.Xset if self.Xset is not None else ConstraintSet.unbounded(nx)
        Uset = self.Uset if self.Uset is not None else ConstraintSet.unbounded(nu)
        if Xset.dim != nx or Uset.dim != nu:
            raise DimensionMismatch("constraint set dimensions do not match the system")
        for k, v in dict(Q=Q, R=R, r_x=r_x, r_u=r_u, x1=x1, Xset=Xset, Uset=Uset).items():
            object.__setattr__(self, k, v)

    @property
    def nx(self):
        return self.system.nx

    @property
    def nu(self):
        return self.system.nu

    def objective(self, x, u):
        """Tracking cost of predicted states ``x`` (N, nx) and inputs ``u`` (N, nu)."""
        ex = np.asarray(x) - self.r_x
        eu = np.asarray(u) - self.r_u
        return 0.5 * float(np.einsum("ki,ij,kj->", ex, self.Q, ex) + np.einsum("ki,ij,kj->", eu, self.R, eu))

    def simulate(self, u):
        """Predicted states x^2..x^{N+1} for the input sequence ``u``."""
        A, B = self.system.A, self.system.B
        xs = np.empty((self.N, self.nx))
        xk = self.x1
        for k in range(self.N):
            xk = A @ xk + B @ u[k]
            xs[k] = xk
        return xs


@dataclass(frozen=True)
class Partition:
    """Consecutive grouping of states and inputs into M subsystems."""

    xdims: tuple
    udims: tuple

    def __post_init__(self):
        xd = tuple(int(v) for v in self.xdims)
        ud = tuple(int(v) for v in self.udims)
        if len(xd) < 1 or len(xd) != len(ud):
            raise DimensionMismatch("partition needs M >= 1 matching xdims/udims")
        if any(v < 1 for v in xd) or any(v < 0 for v in ud):
            raise DimensionMismatch("partition requires x_i >= 1 and u_i >= 0")
        object.__setattr__(self, "xdims", xd)
        object.__setattr__(self, "udims", ud)

    @classmethod
    def trivial(cls, nx, nu):
        return cls((nx,), (nu,))

    @property
    def M(self):
        return len(self.xdims)

    @property
    def nx(self):
        return sum(self.xdims)

    @property
    def nu(self):
        return sum(self.udims)

    @property
    def x_offsets(self):
        return np.cumsum((0,) + self.xdims)

    @property
    def u_offsets(self):
        return np.cumsum((0,) + self.udims)

    def xs(self, i):
        o = self.x_offsets
        return slice(int(o[i]), int(o[i + 1]))

    def us(self, i):
        o = self.u_offsets
        return slice(int(o[i]), int(o[i + 1]))

    def check(self, nx, nu):
        if self.nx != nx or self.nu != nu:
            raise DimensionMismatch(
                f"partition covers ({self.nx}, {self.nu}) but the system has ({nx}, {nu})")

    def state_owner(self):
        """Subsystem index for each state."""
        return np.repeat(np.arange(self.M), self.xdims)

    def input_owner(self):
        return np.repeat(np.arange(self.M), self.udims)


@dataclass
class AdmissibilityReport:
    passed: bool
    violations: list
    Q_blocks: list
    R_blocks: list
    X_sets: list
    U_sets: list
    tolerance: float = BLOCK_DIAG_RTOL

    def raise_if_failed(self):
        if not self.passed:
            raise NotAdmissible("partition is not admissible", self.violations)


def _off_block_violations(name, M, offs, tol):
    bad = []
    scale = np.max(np.abs(M)) if M.size else 0.0
    owner = np.repeat(np.arange(len(offs) - 1), np.diff(offs))
    mask = owner[:, None] != owner[None, :]
    for r, c in zip(*np.nonzero(mask & (np.abs(M) > tol * scale))):
        bad.append(f"{name}[{r},{c}] = {M[r, c]:.6g} couples subsystems {owner[r]} and {owner[c]}")
    return bad


def validate_admissibility(problem: MpcProblem, partition: Partition,
                           rel_tol: float = BLOCK_DIAG_RTOL) -> AdmissibilityReport:
    """Check that the weights and constraint sets decompose along ``partition``.

    Off-block entries of Q and R count as violations when they exceed
    ``rel_tol`` times the largest absolute entry.  Box and unbounded sets
    always separate; custom sets must declare per-subsystem factors.
    """
    partition.check(problem.nx, problem.nu)
    violations = _off_block_violations("Q", problem.Q, partition.x_offsets, rel_tol)
    violations += _off_block_violations("R", problem.R, partition.u_offsets, rel_tol)
    Qb = [np.array(problem.Q[partition.xs(i), partition.xs(i)]) for i in range(partition.M)]
    Rb = [np.array(problem.R[partition.us(i), partition.us(i)]) for i in range(partition.M)]
    Xs = Us = []
    try:
        Xs = problem.Xset.split(partition.xdims)
    except NotAdmissible as exc:
        violations += ["X: " + v for v in exc.violations]
    try:
        Us = problem.Uset.split(partition.udims)
    except NotAdmissible as exc:
        violations += ["U: " + v for v in exc.violations]
    return AdmissibilityReport(not violations, violations, Qb, Rb, Xs, Us, rel_tol)


@dataclass(frozen=True)
class Decomposition:
    """Internal/external split of (A, B) and the virtual-input bases W_i."""

    partition: Partition
    Aint: np.ndarray
    Aext: np.ndarray
    Bint: np.ndarray
    Bext: np.ndarray
    W: tuple
    wdims: tuple
    out1: bool
    rank_tol: float

    def A_block(self, i, j):
        p = self.partition
        return self.Aint[p.xs(i), p.xs(j)] + self.Aext[p.xs(i), p.xs(j)]

    def B_block(self, i, j):
        p = self.partition
        return self.Bint[p.xs(i), p.us(j)] + self.Bext[p.xs(i), p.us(j)]

    @property
    def nw(self):
        return sum(self.wdims)


def decompose(system: LtiSystem, partition: Partition,
              rank_tol: float = DEFAULT_RANK_TOL) -> Decomposition:
    """Split ``system`` into block-diagonal and coupling parts.

    ``W_i`` is an orthonormal basis of the range of subsystem ``i``'s
    off-diagonal row block ``[A_ij, B_ij]_{j != i}``, taken from an SVD with
    singular values below ``rank_tol * sigma_max`` discarded.
    """
    partition.check(system.nx, system.nu)
    A, B = system.A, system.B
    xown, uown = partition.state_owner(), partition.input_owner()
    amask = xown[:, None] == xown[None, :]
    bmask = xown[:, None] == uown[None, :]
    Aint = np.where(amask, A, 0.0)
    Aext = np.where(amask, 0.0, A)
    Bint = np.where(bmask, B, 0.0)
    Bext = np.where(bmask, 0.0, B)

    Ws, wdims = [], []
    for i in range(partition.M):
        rows = partition.xs(i)
        block = np.hstack([Aext[rows], Bext[rows]])
        if block.size == 0 or not np.any(block):
            Ws.append(np.zeros((partition.xdims[i], 0)))
            wdims.append(0)
            continue
        U, s, _ = np.linalg.svd(block, full_matrices=False)
        r = int(np.sum(s > rank_tol * s[0]))
        Ws.append(np.ascontiguousarray(U[:, :r]))
        wdims.append(r)

    # each subsystem's columns may reach at most one other block row
    out1 = True
    ext = np.hstack([Aext, Bext]) != 0
    col_owner = np.concatenate([xown, uown])
    for j in range(partition.M):
        hit_rows = np.nonzero(ext[:, col_owner == j].any(axis=1))[0]
        if np.unique(xown[hit_rows]).size > 1:
            out1 = False
            break

    for a in (Aint, Aext, Bint, Bext):
        a.setflags(write=False)
    return Decomposition(partition, Aint, Aext, Bint, Bext, tuple(Ws), tuple(wdims), out1, rank_tol)


@dataclass(frozen=True)
class Subsystem:
    """Stacked data of one virtual subsystem (dense arrays; small)."""

    index: int
    N: int
    nx: int
    nu: int
    nw: int
    A: np.ndarray
    B: np.ndarray
    W: np.ndarray
    Q: np.ndarray
    R: np.ndarray
    Qcal: np.ndarray
    q: np.ndarray
    K: float
    C: np.ndarray
    c: np.ndarray
    r_y: np.ndarray
    lower: np.ndarray
    upper: np.ndarray
    Xset: ConstraintSet
    Uset: ConstraintSet
    offset: int

    @property
    def stage(self):
        return self.nu + self.nw + self.nx

    @property
    def ny(self):
        return self.N * self.stage

    @property
    def is_box(self):
        return self.Xset.kind != "custom" and self.Uset.kind != "custom"

    def u_index(self, k):
        """Local indices of u_i^{k+1} (0-based stage k)."""
        s = k * self.stage
        return np.arange(s, s + self.nu)

    def w_index(self, k):
        s = k * self.stage + self.nu
        return np.arange(s, s + self.nw)

    def x_index(self, k):
        """Local indices of x_i^{k+2}, stored in stage k."""
        s = k * self.stage + self.nu + self.nw
        return np.arange(s, s + self.nx)

    def project(self, z):
        """Projection onto Y_i = prod_k U_i x R^{w_i} x X_i."""
        if self.is_box:
            return np.minimum(np.maximum(z, self.lower), self.upper)
        out = np.array(z, dtype=float)
        for k in range(self.N):
            ui, xi = self.u_index(k), self.x_index(k)
            if self.nu:
                out[ui] = self.Uset.project(out[ui])
            out[xi] = self.Xset.project(out[xi])
        return out


@dataclass(frozen=True)
class PartitionedProblem:
    """Stacked form: per-subsystem objectives, dynamics and sets plus ``D y = d``.

    ``perm`` sorts ``y`` by time: ``y[perm]`` is ``[ybar^1; ...; ybar^{N+1}]``
    with ``ybar^1 = [u^1; w^1]``, ``ybar^k = [x^k; u^k; w^k]`` and
    ``ybar^{N+1} = x^{N+1}``.  ``time_blocks[k]`` holds the global indices of
    ``ybar^{k+1}``.
    """

    problem: MpcProblem
    partition: Partition
    decomposition: Decomposition
    subsystems: tuple
    D: sp.csr_matrix
    d: np.ndarray
    coupling_time: np.ndarray
    coupling_owner: np.ndarray
    perm: np.ndarray
    time_blocks: tuple

    @property
    def M(self):
        return self.partition.M

    @property
    def N(self):
        return self.problem.N

    @property
    def ny(self):
        return sum(s.ny for s in self.subsystems)

    @property
    def nw(self):
        return self.decomposition.nw

    def slices(self):
        return [slice(s.offset, s.offset + s.ny) for s in self.subsystems]

    def split(self, y):
        return [y[sl] for sl in self.slices()]

    def permutation_matrix(self):
        n = self.ny
        return sp.csr_matrix((np.ones(n), (np.arange(n), self.perm)), shape=(n, n))

    def extract(self, y):
        """Return predicted states (N, nx) and inputs (N, nu) from ``y``."""
        N, p = self.N, self.partition
        x = np.empty((N, p.nx))
        u = np.empty((N, p.nu))
        for s in self.subsystems:
            yi = y[s.offset:s.offset + s.ny].reshape(N, s.stage)
            u[:, p.us(s.index)] = yi[:, :s.nu]
            x[:, p.xs(s.index)] = yi[:, s.nu + s.nw:]
        return x, u

    def lift(self, x, u):
        """Stack a trajectory into ``y``, filling ``w_i^k = W_i^T v_i^k``."""
        N, p, dec = self.N, self.partition, self.decomposition
        x = np.asarray(x, dtype=float).reshape(N, p.nx)
        u = np.asarray(u, dtype=float).reshape(N, p.nu)
        xprev = np.vstack([self.problem.x1, x[:-1]])
        v = xprev @ dec.Aext.T + u @ dec.Bext.T
        y = np.empty(self.ny)
        for s in self.subsystems:
            w = v[:, p.xs(s.index)] @ s.W
            stage = np.hstack([u[:, p.us(s.index)], w, x[:, p.xs(s.index)]])
            y[s.offset:s.offset + s.ny] = stage.ravel()
        return y

    def objective(self, y):
        total = 0.0
        for s in self.subsystems:
            yi = y[s.offset:s.offset + s.ny]
            total += 0.5 * yi @ (s.Qcal @ yi) + s.q @ yi + s.K
        return float(total)

    def dynamics_residual(self, y):
        return max((float(np.max(np.abs(s.C @ y[s.offset:s.offset + s.ny] - s.c), initial=0.0))
                    for s in self.subsystems), default=0.0)

    def coupling_residual(self, y):
        if self.D.shape[0] == 0:
            return 0.0
        return float(np.max(np.abs(self.D @ y - self.d)))


def build_stacked(problem: MpcProblem, partition: Partition,
                  dec: Optional[Decomposition] = None,
                  rank_tol: float = DEFAULT_RANK_TOL) -> PartitionedProblem:
    """Assemble the stacked partitioned problem.

    Coupling rows take the form ``w_i^k - W_i^T (A_ext x^k + B_ext u^k) = 0``
    restricted to block row ``i``; for ``k = 1`` the known ``x^1`` term moves
    to ``d``.
    """
    report = validate_admissibility(problem, partition)
    report.raise_if_failed()
    if dec is None:
        dec = decompose(problem.system, partition, rank_tol)
    N = problem.N
    A, B = problem.system.A, problem.system.B
    subs = []
    offset = 0
    for i in range(partition.M):
        xs, us = partition.xs(i), partition.us(i)
        nx, nu, nw = partition.xdims[i], partition.udims[i], dec.wdims[i]
        Aii, Bii, Wi = A[xs, xs], B[xs, us], dec.W[i]
        Qi, Ri = report.Q_blocks[i], report.R_blocks[i]
        n = nu + nw + nx
        ny = N * n
        stage_w = np.zeros((n, n))
        stage_w[:nu, :nu] = Ri
        stage_w[nu + nw:, nu + nw:] = Qi
        Qcal = np.kron(np.eye(N), stage_w)
        r_y = np.hstack([problem.r_u[:, us], np.zeros((N, nw)), problem.r_x[:, xs]]).ravel()
        q = -Qcal @ r_y
        K = 0.5 * float(r_y @ Qcal @ r_y)
        C = np.zeros((N * nx, ny))
        for k in range(N):
            rows = slice(k * nx, (k + 1) * nx)
            c0 = k * n
            C[rows, c0:c0 + nu] = Bii
            C[rows, c0 + nu:c0 + nu + nw] = Wi
            C[rows, c0 + nu + nw:c0 + n] = -np.eye(nx)
            if k > 0:
                C[rows, c0 - nx:c0] = Aii
        c = np.zeros(N * nx)
        c[:nx] = -Aii @ problem.x1[xs]
        Xi, Ui = report.X_sets[i], report.U_sets[i]
        xb, ub = Xi.bounds(), Ui.bounds()
        if xb is not None and ub is not None:
            stage_lo = np.concatenate([ub[0], np.full(nw, -np.inf), xb[0]])
            stage_hi = np.concatenate([ub[1], np.full(nw, np.inf), xb[1]])
        else:
            stage_lo = np.full(n, -np.inf)
            stage_hi = np.full(n, np.inf)
        arrays = dict(A=np.array(Aii), B=np.array(Bii), W=Wi, Q=Qi, R=Ri, Qcal=Qcal, q=q, C=C, c=c,
                      r_y=r_y, lower=np.tile(stage_lo, N), upper=np.tile(stage_hi, N))
        for a in arrays.values():
            a.setflags(write=False)
        subs.append(Subsystem(index=i, N=N, nx=nx, nu=nu, nw=nw, K=K, Xset=Xi, Uset=Ui,
                              offset=offset, **arrays))
        offset += ny

    D, d, ctime, cowner = _coupling(problem, partition, dec, subs)
    perm, blocks = _time_permutation(N, subs)
    return PartitionedProblem(problem, partition, dec, tuple(subs), D, d, ctime, cowner, perm, blocks)


def _coupling(problem, partition, dec, subs):
    N = problem.N
    ny = sum(s.ny for s in subs)
    rows, cols, vals = [], [], []
    d = []
    ctime, cowner = [], []
    r = 0
    for k in range(N):
        for s in subs:
            if s.nw == 0:
                continue
            i = s.index
            G = s.W.T @ dec.Aext[partition.xs(i)]   # (nw, nx)
            H = s.W.T @ dec.Bext[partition.xs(i)]   # (nw, nu)
            for a in range(s.nw):
                rows.append(r + a)
                cols.append(s.offset + s.w_index(k)[a])
                vals.append(1.0)
            for t in subs:
                if k > 0:
                    blk = G[:, partition.xs(t.index)]
                    gi = t.offset + t.x_index(k - 1)
                    for a, b in zip(*np.nonzero(blk)):
                        rows.append(r + a)
                        cols.append(gi[b])
                        vals.append(-blk[a, b])
                blk = H[:, partition.us(t.index)]
                gi = t.offset + t.u_index(k)
                for a, b in zip(*np.nonzero(blk)):
                    rows.append(r + a)
                    cols.append(gi[b])
                    vals.append(-blk[a, b])
            d.extend(G @ problem.x1 if k == 0 else np.zeros(s.nw))
            ctime.extend([k] * s.nw)
            cowner.extend([i] * s.nw)
            r += s.nw
    D = sp.csr_matrix((vals, (rows, cols)), shape=(r, ny))
    D.sum_duplicates()
    return D, np.asarray(d, dtype=float), np.asarray(ctime, dtype=int), np.asarray(cowner, dtype=int)


def _time_permutation(N, subs):
    blocks = []
    for k in range(N + 1):
        parts = []
        if k > 0:
            parts += [s.offset + s.x_index(k - 1) for s in subs]
        if k < N:
            parts += [s.offset + s.u_index(k) for s in subs]
            parts += [s.offset + s.w_index(k) for s in subs]
        blocks.append(np.concatenate(parts).astype(int) if parts else np.zeros(0, dtype=int))
    perm = np.concatenate(blocks)
    return perm, tuple(blocks)


def verify_equivalence(problem: MpcProblem, pp: PartitionedProblem, traj, tol: float = 1e-9) -> bool:
    """True iff the lifted trajectory satisfies every stacked equality within ``tol``.

    ``traj`` is ``(x, u)`` with predicted states x^2..x^{N+1} and inputs.
    """
    x, u = traj
    y = pp.lift(x, u)
    return pp.dynamics_residual(y) <= tol and pp.coupling_residual(y) <= tol


def lti_problem(system: LtiSystem, N: int, *, Q=None, R=None, r_x=None, r_u=None, x1=None,
                Xset=None, Uset=None) -> MpcProblem:
    """Convenience constructor with identity weights and zero references."""
    nx, nu = system.nx, system.nu
    return MpcProblem(
        system=system, N=N,
        Q=np.eye(nx) if Q is None else Q,
        R=np.eye(nu) if R is None else R,
        r_x=np.zeros((N, nx)) if r_x is None else r_x,
        r_u=np.zeros((N, nu)) if r_u is None else r_u,
        x1=np.zeros(nx) if x1 is None else x1,
        Xset=Xset, Uset=Uset,
    )


def stack_sizes(partition: Partition, wdims: Sequence[int], N: int) -> int:
    """Dimension of ``y`` for the given partition and virtual-input sizes."""
    return N * sum(u + w + x for x, u, w in zip(partition.xdims, partition.udims, wdims))

"""Seeded generators for test systems and the MPC problems built on them.

Recipe: standard-normal entries on the category's block pattern, then
``A <- 0.95 A / rho(A)`` whenever the spectral radius is at least one.
Rank-r couplings are sums of r random outer products.  A draw that fails
the controllability test is redrawn from the same stream.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass
from typing import Optional

import numpy as np

from .errors import GenerationFailed
from .problem import ConstraintSet, LtiSystem, MpcProblem, Partition
from .structure import check_controllable, check_semiconvergent

CATEGORIES = ("full", "sparse", "lower_triangular", "banded", "lower_banded", "star")
ALL_KINDS = CATEGORIES + ("cascade", "example_unstructured", "fig4_chain")
SPECTRAL_TARGET = 0.95
SPARSE_FILL = 0.1
MAX_RETRIES = 50


@dataclass(frozen=True)
class GenSpec:
    """Everything needed to regenerate a system bit-exactly.

    ``xdims``/``udims`` give the block sizes; for ``cascade`` and
    ``fig4_chain`` they are derived from ``blocks``, ``x_i`` and ``u_i``.
    """

    category: str
    xdims: tuple = (3, 2)
    udims: tuple = (1, 1)
    seed: int = 0
    spectral_radius_target: float = SPECTRAL_TARGET
    coupling_rank: int = 1
    fill: float = SPARSE_FILL

    def __post_init__(self):
        if self.category not in ALL_KINDS:
            raise ValueError(f"unknown category {self.category!r}")
        if not 0 < self.spectral_radius_target < 1:
            raise ValueError("spectral_radius_target must lie in (0, 1)")
        object.__setattr__(self, "xdims", tuple(int(v) for v in self.xdims))
        object.__setattr__(self, "udims", tuple(int(v) for v in self.udims))

    def to_dict(self):
        d = asdict(self)
        d["xdims"] = list(self.xdims)
        d["udims"] = list(self.udims)
        return d


def split_dims(x, blocks):
    """Near-even consecutive split of ``x`` states into ``blocks`` groups."""
    base, extra = divmod(int(x), int(blocks))
    return tuple(base + (1 if i < extra else 0) for i in range(blocks))


def _stabilize(A, target):
    r = float(np.max(np.abs(np.linalg.eigvals(A)))) if A.size else 0.0
    if r >= 1.0:
        A = target * A / r
    return A


def _block_mask(pattern, xdims, udims, rng, fill):
    """Entry masks for A and B from a block-level boolean pattern."""
    xo = np.repeat(np.arange(len(xdims)), xdims)
    uo = np.repeat(np.arange(len(udims)), udims)
    Amask = pattern[xo][:, xo].copy()
    Bmask = pattern[xo][:, uo].copy()
    if fill is not None:
        offA = xo[:, None] != xo[None, :]
        offB = xo[:, None] != uo[None, :]
        Amask &= ~offA | (rng.random(Amask.shape) < fill)
        Bmask &= ~offB | (rng.random(Bmask.shape) < fill)
    return Amask, Bmask


def block_pattern(category, M):
    i, j = np.indices((M, M))
    if category in ("full", "sparse"):
        return np.ones((M, M), dtype=bool)
    if category == "lower_triangular":
        return i >= j
    if category == "banded":
        return np.abs(i - j) <= 1
    if category == "lower_banded":
        return (i - j == 0) | (i - j == 1)
    if category == "star":
        return (i == j) | (i == 0) | (j == 0)
    raise ValueError(f"no block pattern for {category!r}")


def _draw(rng, make, target):
    for _ in range(MAX_RETRIES):
        A, B = make(rng)
        A = _stabilize(A, target)
        if check_semiconvergent(A) and check_controllable(A, B):
            return LtiSystem(A, B)
    raise GenerationFailed(f"no controllable draw within {MAX_RETRIES} attempts")


def gen_category(spec: GenSpec):
    """Random system of one of the six study categories and its block partition."""
    if spec.category not in CATEGORIES:
        raise ValueError(f"{spec.category!r} is not a random category")
    part = Partition(spec.xdims, spec.udims)
    pattern = block_pattern(spec.category, part.M)
    fill = spec.fill if spec.category == "sparse" else None

    def make(rng):
        Am, Bm = _block_mask(pattern, part.xdims, part.udims, rng, fill)
        A = np.where(Am, rng.standard_normal(Am.shape), 0.0)
        B = np.where(Bm, rng.standard_normal(Bm.shape), 0.0)
        return A, B

    return _draw(np.random.default_rng(spec.seed), make, spec.spectral_radius_target), part


def gen_cascade(S=20, x_i=6, u_i=1, coupling_rank=1, seed=0, target=SPECTRAL_TARGET):
    """Lower block-bidiagonal cascade with rank-``coupling_rank`` stage couplings."""
    if S < 2:
        raise ValueError("a cascade needs at least two stages")
    part = Partition((x_i,) * S, (u_i,) * S)

    def make(rng):
        A = np.zeros((S * x_i, S * x_i))
        B = np.zeros((S * x_i, S * u_i))
        for i in range(S):
            r = slice(i * x_i, (i + 1) * x_i)
            A[r, r] = rng.standard_normal((x_i, x_i))
            B[r, i * u_i:(i + 1) * u_i] = rng.standard_normal((x_i, u_i))
            if i > 0 and coupling_rank > 0:
                a = rng.standard_normal((x_i, coupling_rank))
                b = rng.standard_normal((x_i, coupling_rank))
                A[r, (i - 1) * x_i:i * x_i] = a @ b.T
        return A, B

    return _draw(np.random.default_rng(seed), make, target), part


def example_unstructured():
    """Two-state, one-input system with all-1/2 dynamics and partition {1,1}/{1,0}."""
    return LtiSystem(np.full((2, 2), 0.5), np.ones((2, 1))), Partition((1, 1), (1, 0))


def gen_fig4_chain(M, seed=0, target=SPECTRAL_TARGET):
    """Chain of 2x2 blocks with rank-1 super-diagonal couplings closed by a
    full-rank ``A_{M,1}``; returns (system, partition, expected wdims)."""
    if M < 1:
        raise ValueError("M must be positive")
    part = Partition((2,) * M, (1,) * M)

    def make(rng):
        A = np.zeros((2 * M, 2 * M))
        B = np.zeros((2 * M, M))
        for i in range(M):
            r = slice(2 * i, 2 * i + 2)
            A[r, r] = rng.standard_normal((2, 2))
            B[r, i] = rng.standard_normal(2)
            if i + 1 < M:
                A[r, 2 * i + 2:2 * i + 4] = np.outer(rng.standard_normal(2), rng.standard_normal(2))
        if M > 1:
            A[2 * M - 2:, :2] = rng.standard_normal((2, 2))
        return A, B

    wdims = tuple([1] * (M - 1) + [2]) if M > 1 else (0,)
    return _draw(np.random.default_rng(seed), make, target), part, wdims


def generate(spec: GenSpec):
    """Dispatch on ``spec.category``; returns (system, partition)."""
    if spec.category == "cascade":
        return gen_cascade(len(spec.xdims), spec.xdims[0], spec.udims[0], spec.coupling_rank,
                           spec.seed, spec.spectral_radius_target)
    if spec.category == "example_unstructured":
        return example_unstructured()
    if spec.category == "fig4_chain":
        sys_, part, _ = gen_fig4_chain(len(spec.xdims), spec.seed, spec.spectral_radius_target)
        return sys_, part
    return gen_category(spec)


def wrap_mpc(system: LtiSystem, N: int, seed: int = 0, *, bounded: bool = True,
             Q_scale: float = 1.0, R_scale: float = 0.1, ref_noise: float = 1.0,
             x1: Optional[np.ndarray] = None) -> MpcProblem:
    """Tracking MPC problem around ``system`` that is feasible by construction.

    A random input sequence is simulated from ``x1``; the box bounds contain
    that trajectory and the state references are the trajectory plus
    Gaussian noise of size ``ref_noise`` (so bounds may become active).
    """
    rng = np.random.default_rng(seed)
    nx, nu = system.nx, system.nu
    if x1 is None:
        x1 = rng.standard_normal(nx)
    u_sim = rng.standard_normal((N, nu))
    xs = np.empty((N, nx))
    xk = np.asarray(x1, dtype=float)
    for k in range(N):
        xk = system.A @ xk + system.B @ u_sim[k]
        xs[k] = xk
    r_x = xs + ref_noise * rng.standard_normal((N, nx))
    r_u = np.zeros((N, nu))
    Xset = Uset = None
    if bounded:
        xmax = np.maximum(1.05 * np.max(np.abs(xs), axis=0), 0.5)
        umax = np.maximum(1.05 * np.max(np.abs(u_sim), axis=0), 0.5) if nu else np.zeros(0)
        Xset = ConstraintSet.box(-xmax, xmax)
        Uset = ConstraintSet.box(-umax, umax)
    return MpcProblem(system, N, Q_scale * np.eye(nx), R_scale * np.eye(nu), r_x, r_u, x1,
                      Xset, Uset)


def regulation_problem(system: LtiSystem, N: int, x1, Q_scale=1.0, R_scale=0.1) -> MpcProblem:
    """Unconstrained regulation to the origin from ``x1``."""
    nx, nu = system.nx, system.nu
    return MpcProblem(system, N, Q_scale * np.eye(nx), R_scale * np.eye(nu), np.zeros((N, nx)),
                      np.zeros((N, nu)), np.asarray(x1, dtype=float))

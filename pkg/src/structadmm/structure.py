"""Impulse-driven system flow, link usage and the separation tendency.

The Delta-system ``dx^{k+1} = A dx^k + B du^k`` is excited with the
difference of a unit input impulse (``du^0 = 1``, ``du^1 = -1``, zero
afterwards, ``dx^0 = 0``).  Its flow ``Phi^k = [A diag(dx^k), B diag(du^k)]``
splits each state increment into per-link contributions and ``Gamma`` is
the element-wise L2 norm of ``Phi`` over time.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .errors import DimensionMismatch, Undefined, ZeroScale
from .problem import LtiSystem, Partition

DECAY_TOL = 1e-12
MAX_K = 10_000
STRUCTURED_THRESHOLD = 0.75


def check_semiconvergent(A, tol: float = 1e-9) -> bool:
    """True iff ``lim A^k`` exists.

    Every eigenvalue must lie strictly inside the unit disc except for the
    eigenvalue 1, which must be semisimple.
    """
    A = np.asarray(A, dtype=float)
    n = A.shape[0]
    ev = np.linalg.eigvals(A)
    at_one = np.abs(ev - 1.0) <= tol
    if np.any(~at_one & (np.abs(ev) >= 1.0 - tol)):
        return False
    m = int(np.sum(at_one))
    if m == 0:
        return True
    s = np.linalg.svd(A - np.eye(n), compute_uv=False)
    scale = max(1.0, float(np.max(s)) if s.size else 1.0)
    nullity = int(np.sum(s <= np.sqrt(tol) * scale))
    return nullity == m


def check_controllable(A, B, tol: float = 1e-10) -> bool:
    """Numerical rank test of the controllability matrix.

    The Krylov blocks ``B, AB, A^2B, ...`` are orthogonalized as they are
    generated, so the rank decision does not suffer from the geometric decay
    of ``A^k B`` for stable ``A``.
    """
    A = np.asarray(A, dtype=float)
    B = np.asarray(B, dtype=float).reshape(A.shape[0], -1)
    n = A.shape[0]
    if B.shape[1] == 0:
        return False
    scale = max(1.0, np.linalg.norm(A, 2))

    def _orth(V, basis):
        for _ in range(2):
            if basis.shape[1]:
                V = V - basis @ (basis.T @ V)
        U, s, _ = np.linalg.svd(V, full_matrices=False)
        ref = max(1.0, s[0]) if s.size else 1.0
        return U[:, s > tol * ref]

    nb = np.linalg.norm(B, 2)
    if nb == 0:
        return False
    basis = _orth(B / nb, np.zeros((n, 0)))
    new = basis
    while basis.shape[1] < n and new.shape[1]:
        new = _orth(A @ new / scale, basis)
        basis = np.hstack([basis, new])
    return basis.shape[1] == n


@dataclass
class FlowSequence:
    Phi: list
    truncation_k: int
    converged: bool


@dataclass
class LinkUsage:
    Gamma: np.ndarray
    nx: int

    @property
    def Gamma_A(self):
        return self.Gamma[:, :self.nx]

    @property
    def Gamma_B(self):
        return self.Gamma[:, self.nx:]


def link_usage(system: LtiSystem, max_k: int = MAX_K, decay_tol: float = DECAY_TOL,
               keep_flow: bool = True):
    """Simulate the impulse-driven Delta-system and accumulate the link usage.

    Parameters
    ----------
    system : LtiSystem
    max_k : int
        Hard cap on the number of flow steps.
    decay_tol : float
        Stop once ``||dx^k||_inf < decay_tol`` after the impulse has ended.
    keep_flow : bool
        Store every ``Phi^k``; disable for large systems.

    Returns
    -------
    (FlowSequence, LinkUsage)
    """
    A, B = system.A, system.B
    nx, nu = system.nx, system.nu
    dx = np.zeros(nx)
    acc = np.zeros((nx, nx + nu))
    flows = []
    converged = False
    k = 0
    for k in range(max_k):
        du = np.ones(nu) if k == 0 else (-np.ones(nu) if k == 1 else np.zeros(nu))
        if k >= 2 and np.max(np.abs(dx), initial=0.0) < decay_tol:
            converged = True
            break
        Phi = np.hstack([A * dx[None, :], B * du[None, :]])
        if not np.all(np.isfinite(Phi)):
            break
        acc += Phi * Phi
        if keep_flow:
            flows.append(Phi)
        dx = Phi.sum(axis=1)
    else:
        k = max_k
    return FlowSequence(flows, k, converged), LinkUsage(np.sqrt(acc), nx)


@dataclass
class StructureReport:
    s_i: Optional[np.ndarray]
    s: Optional[float]
    exists: bool
    semiconvergent: bool
    controllable: bool
    converged: bool = True
    zero_rows: list = field(default_factory=list)

    @property
    def structured(self):
        """Annotation only: ``s`` above the empirical 0.75 threshold."""
        return self.s is not None and self.s >= STRUCTURED_THRESHOLD


def _row_tendency(Gamma, partition: Partition):
    nx = partition.nx
    own = np.concatenate([partition.state_owner(), partition.input_owner()])
    rows = partition.state_owner()
    s = np.empty(nx)
    zero = []
    for r in range(nx):
        g = Gamma[r]
        if not np.any(g > 0):
            zero.append(r)
            s[r] = np.nan
            continue
        inside = own == rows[r]
        n_int, n_ext = int(inside.sum()), int((~inside).sum())
        if n_ext == 0:
            s[r] = 1.0
            continue
        mi = g[inside].sum() / n_int
        me = g[~inside].sum() / n_ext
        s[r] = mi / (mi + me)
    return s, zero


def separation_tendency(gamma: LinkUsage, partition: Partition, *, semiconvergent=True,
                        controllable=True, converged=True) -> StructureReport:
    """Row-wise ratio of mean internal to mean total link usage.

    Rows whose external part is empty get ``s_i = 1``.

    Raises
    ------
    Undefined
        If a row of ``Gamma`` is identically zero.
    """
    G = gamma.Gamma
    if G.shape != (partition.nx, partition.nx + partition.nu):
        raise DimensionMismatch("partition does not match the link usage shape")
    s_i, zero = _row_tendency(G, partition)
    if zero:
        raise Undefined(f"link usage rows {zero} are zero")
    if not np.all(np.isfinite(G)):
        raise Undefined("link usage is not finite")
    return StructureReport(s_i, float(np.mean(s_i)), True, semiconvergent, controllable, converged)


def analyze(system: LtiSystem, partition: Partition, max_k: int = MAX_K,
            decay_tol: float = DECAY_TOL):
    """Link usage plus a structure report; ``s`` is None when undefined."""
    partition.check(system.nx, system.nu)
    semi = check_semiconvergent(system.A)
    ctrl = check_controllable(system.A, system.B)
    flow, gam = link_usage(system, max_k, decay_tol, keep_flow=False)
    try:
        if not flow.converged:
            raise Undefined("impulse response did not decay")
        rep = separation_tendency(gam, partition, semiconvergent=semi, controllable=ctrl)
    except Undefined:
        s_i, zero = _row_tendency(np.nan_to_num(gam.Gamma), partition)
        rep = StructureReport(None, None, False, semi, ctrl, flow.converged, zero)
    return gam, rep


def diagonal_transform(system: LtiSystem, T_diag) -> LtiSystem:
    """System in coordinates ``[x; u] = T [xbar; ubar]`` for diagonal ``T``."""
    t = np.asarray(T_diag, dtype=float).ravel()
    nx, nu = system.nx, system.nu
    if t.size != nx + nu:
        raise DimensionMismatch(f"expected {nx + nu} scale factors, got {t.size}")
    if np.any(t == 0):
        raise ZeroScale("diagonal transform needs nonzero entries")
    tx, tu = t[:nx], t[nx:]
    A = system.A * tx[None, :] / tx[:, None]
    B = system.B * tu[None, :] / tx[:, None]
    return LtiSystem(A, B)

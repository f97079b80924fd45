"""Worst-case optimal penalty parameters for the per-subsystem QP steps."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import NotPositiveDefinite, RankDefect

PD_TOL = 1e-12
RANK_RTOL = 1e-10


def null_space_basis(C):
    """Orthonormal basis ``Z`` of ``null(C)`` with ``C Z = 0`` and ``Z^T Z = I``.

    Columns are taken from the SVD and signed so that the first entry of
    each column with magnitude above 1e-12 is positive.

    Raises
    ------
    RankDefect
        If ``C`` does not have full row rank.
    """
    C = np.atleast_2d(np.asarray(C, dtype=float))
    m, n = C.shape
    if m == 0:
        return np.eye(n)
    _, s, Vt = np.linalg.svd(C, full_matrices=True)
    rank = int(np.sum(s > RANK_RTOL * s[0])) if s.size and s[0] > 0 else 0
    if rank < m:
        raise RankDefect(f"constraint matrix has row rank {rank} < {m}")
    Z = Vt[m:].T.copy()
    for j in range(Z.shape[1]):
        nz = np.nonzero(np.abs(Z[:, j]) > 1e-12)[0]
        if nz.size and Z[nz[0], j] < 0:
            Z[:, j] *= -1.0
    return Z


def projected_hessian(Qcal, Z):
    H = Z.T @ np.asarray(Qcal, dtype=float) @ Z
    return 0.5 * (H + H.T)


def optimal_rho(Qcal, Z):
    """rho* = sqrt(eig_min * eig_max) of ``Z^T Qcal Z``.

    Raises NotPositiveDefinite when the smallest eigenvalue is below 1e-12.
    """
    ev = np.linalg.eigvalsh(projected_hessian(Qcal, Z))
    if ev.size == 0 or ev[0] <= PD_TOL:
        raise NotPositiveDefinite("projected Hessian is not positive definite")
    return float(np.sqrt(ev[0] * ev[-1]))


def contraction_norm(rho, Qcal, Z):
    """Spectral norm of ``(Z^T (Qcal/rho + I) Z)^{-1} - I/2``."""
    if not rho > 0:
        raise ValueError("rho must be positive")
    H = projected_hessian(Qcal, Z)
    n = H.shape[0]
    Minv = np.linalg.inv(H / rho + Z.T @ Z)
    return float(np.linalg.norm(Minv - 0.5 * np.eye(n), 2))


@dataclass
class PenaltyReport:
    """Per-subsystem spectrum of the projected Hessian and the chosen penalties.

    ``rho`` equals ``rho_star`` where the Hessian is positive definite and
    the fallback value elsewhere (flagged by ``pd = False``).
    """

    eig_min: np.ndarray
    eig_max: np.ndarray
    rho_star: np.ndarray
    pd: np.ndarray
    rho: np.ndarray
    fallback: float = 1.0

    def rows(self):
        return [(i, float(a), float(b), float(r), bool(p), float(q))
                for i, (a, b, r, p, q) in enumerate(zip(self.eig_min, self.eig_max, self.rho_star,
                                                        self.pd, self.rho))]


def tune_penalties(pp, fallback: float = 1.0) -> PenaltyReport:
    """Compute rho_i* for every subsystem of a partitioned problem."""
    lo, hi, rs, pd = [], [], [], []
    for s in pp.subsystems:
        Z = null_space_basis(s.C)
        ev = np.linalg.eigvalsh(projected_hessian(s.Qcal, Z))
        lo.append(ev[0] if ev.size else np.nan)
        hi.append(ev[-1] if ev.size else np.nan)
        ok = bool(ev.size and ev[0] > PD_TOL)
        pd.append(ok)
        rs.append(float(np.sqrt(ev[0] * ev[-1])) if ok else np.nan)
    rs = np.asarray(rs)
    pd = np.asarray(pd)
    rho = np.where(pd, rs, fallback)
    return PenaltyReport(np.asarray(lo), np.asarray(hi), rs, pd, rho, fallback)


def rho_sweep(Qcal, Z, rho_star, points=50, span=100.0):
    """Contraction norm on a log grid over ``[rho_star/span, span*rho_star]``."""
    grid = np.geomspace(rho_star / span, rho_star * span, points)
    return grid, np.array([contraction_norm(r, Qcal, Z) for r in grid])


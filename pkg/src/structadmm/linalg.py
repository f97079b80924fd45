"""Banded LDL^T factorization and small sparse helpers shared by the solvers."""

from __future__ import annotations

import numpy as np
import scipy.sparse as sp
from scipy.linalg.blas import dtbsv


def bandwidth(S):
    """Lower bandwidth of a (dense) square matrix: max i - j over nonzeros."""
    r, c = np.nonzero(np.asarray(S))
    if r.size == 0:
        return 0
    return int(max(np.max(r - c), 0))


def ldl_banded(S, band=None):
    """LDL^T factorization of a symmetric positive definite banded matrix.

    No pivoting, so the factor keeps the envelope of ``S``: entries of ``L``
    left of the first nonzero of each row of ``S`` stay exactly zero.

    Parameters
    ----------
    S : ndarray, shape (n, n)
        Symmetric matrix.  Only the lower band is read.
    band : int, optional
        Lower bandwidth; detected from the sparsity of ``S`` when omitted.

    Returns
    -------
    L : ndarray, shape (n, n)
        Unit lower triangular factor (dense storage, zeros outside the band).
    d : ndarray, shape (n,)
        Diagonal of ``D``.
    """
    S = np.asarray(S, dtype=float)
    n = S.shape[0]
    b = bandwidth(S) if band is None else int(band)
    L = np.eye(n)
    d = np.zeros(n)
    for j in range(n):
        lo = max(0, j - b)
        lj = L[j, lo:j]
        d[j] = S[j, j] - np.dot(lj * lj, d[lo:j])
        if d[j] <= 0.0:
            raise np.linalg.LinAlgError(f"matrix is not positive definite (pivot {j})")
        hi = min(n, j + b + 1)
        if hi > j + 1:
            # L[i, j] for i in (j, hi): (S_ij - sum_k L_ik L_jk d_k) / d_j
            Lrows = L[j + 1:hi, lo:j]
            L[j + 1:hi, j] = (S[j + 1:hi, j] - Lrows @ (lj * d[lo:j])) / d[j]
    return L, d


def lower_band_storage(L, b):
    """Pack the strictly-lower band of unit-lower ``L`` for BLAS ``tbsv``."""
    n = L.shape[0]
    ab = np.zeros((b + 1, n))
    ab[0] = 1.0
    for off in range(1, b + 1):
        ab[off, : n - off] = np.diagonal(L, -off)
    return np.asfortranarray(ab)


def ldl_solve_banded(ab, b, dinv, rhs):
    """Solve ``L D L^T z = rhs`` given band storage of ``L`` and ``1/d``."""
    if rhs.size == 0:
        return rhs.copy()
    z = dtbsv(b, ab, rhs, lower=1, trans=0, diag=1)
    z *= dinv
    return dtbsv(b, ab, z, lower=1, trans=1, diag=1)


def sparse_from_dense(M):
    """CSR copy of ``M`` holding only its exact nonzeros."""
    out = sp.csr_matrix(np.asarray(M, dtype=float))
    out.eliminate_zeros()
    return out


def row_nnz(M):
    """Nonzeros per row of a dense or sparse matrix."""
    if sp.issparse(M):
        M = M.tocsr()
        return np.diff(M.indptr)
    return np.count_nonzero(np.asarray(M), axis=1)


def matvec_ops(M):
    """(adds, muls) for a zero-skipping matrix-vector product with ``M``."""
    nnz = row_nnz(M)
    return int(np.sum(np.maximum(nnz - 1, 0))), int(np.sum(nnz))


def block_diag_sparse(blocks):
    return sp.block_diag(blocks, format="csr") if blocks else sp.csr_matrix((0, 0))

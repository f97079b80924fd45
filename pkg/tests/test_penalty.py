import numpy as np
import pytest
from hypothesis import given, strategies as st

from structadmm.errors import NotPositiveDefinite, RankDefect
from structadmm.penalty import (contraction_norm, null_space_basis, optimal_rho, projected_hessian, rho_sweep,
                                tune_penalties)
from structadmm.problem import Partition, build_stacked

from conftest import random_problem


def test_null_space_basis_shape_and_sign():
    C = np.array([[1.0, 1.0, 0.0]])
    Z = null_space_basis(C)
    assert Z.shape == (3, 2)
    assert np.allclose(C @ Z, 0) and np.allclose(Z.T @ Z, np.eye(2))
    for j in range(2):
        first = Z[np.abs(Z[:, j]) > 1e-12, j][0]
        assert first > 0


def test_null_space_of_empty_constraint():
    assert np.array_equal(null_space_basis(np.zeros((0, 3))), np.eye(3))


def test_rank_defect():
    with pytest.raises(RankDefect):
        null_space_basis([[1.0, 2.0], [2.0, 4.0]])


def test_optimal_rho_diagonal():
    # unconstrained: Z = I, so rho* = sqrt(min * max)
    Q = np.diag([4.0, 1.0, 9.0])
    assert optimal_rho(Q, np.eye(3)) == pytest.approx(3.0)


def test_not_positive_definite():
    with pytest.raises(NotPositiveDefinite):
        optimal_rho(np.diag([1.0, 0.0]), np.eye(2))


def test_contraction_norm_closed_form():
    # diagonal H: max_j |rho/(h_j+rho) - 1/2|
    h = np.array([0.5, 2.0, 8.0])
    for rho in (0.1, 2.0, 30.0):
        expect = np.max(np.abs(rho / (h + rho) - 0.5))
        assert contraction_norm(rho, np.diag(h), np.eye(3)) == pytest.approx(expect)
    with pytest.raises(ValueError):
        contraction_norm(0.0, np.eye(2), np.eye(2))


@given(st.integers(0, 10_000))
def test_rho_star_minimizes_contraction(seed):
    rng = np.random.default_rng(seed)
    n, m = 6, 2
    Lq = rng.standard_normal((n, n))
    Q = Lq @ Lq.T + 0.1 * np.eye(n)
    Z = null_space_basis(rng.standard_normal((m, n)))
    rs = optimal_rho(Q, Z)
    grid, vals = rho_sweep(Q, Z, rs, points=201, span=100.0)
    best = contraction_norm(rs, Q, Z)
    assert best <= vals.min() + 1e-12
    assert abs(np.argmin(vals) - 100) <= 1


def test_tune_penalties_fallback():
    prob = random_problem(0)
    pp = build_stacked(prob, Partition((2, 2), (1, 1)))
    rep = tune_penalties(pp, fallback=2.5)
    assert rep.pd.all()
    assert np.allclose(rep.rho, np.sqrt(rep.eig_min * rep.eig_max))
    for s, r in zip(pp.subsystems, rep.rho_star):
        assert r == pytest.approx(optimal_rho(s.Qcal, null_space_basis(s.C)))
    rows = rep.rows()
    assert len(rows) == 2 and rows[0][0] == 0


def test_tune_penalties_singular_weight():
    from structadmm.problem import LtiSystem, lti_problem
    prob = lti_problem(LtiSystem(np.eye(2) * 0.5, np.eye(2)), 3, Q=np.diag([1.0, 0.0]), R=np.diag([1.0, 0.0]))
    pp = build_stacked(prob, Partition((1, 1), (1, 1)))
    rep = tune_penalties(pp, fallback=1.0)
    assert list(rep.pd) == [True, False]
    assert rep.rho[1] == 1.0 and np.isnan(rep.rho_star[1])
    assert projected_hessian(np.eye(2), np.eye(2)).shape == (2, 2)

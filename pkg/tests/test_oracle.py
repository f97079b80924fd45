import numpy as np
import pytest

from structadmm.errors import OracleNotConverged
from structadmm.oracle import dense_kkt_solve, kkt_residual, reference_solve

from conftest import random_problem


def test_dense_kkt_unconstrained_by_hand():
    from structadmm.problem import LtiSystem, lti_problem
    # N = 1: min (a x1 + b u - r)^2 / 2 + R u^2 / 2  ->  u = b (r - a x1) / (b^2 + R)
    a, b, r, R, x1 = 0.5, 2.0, 3.0, 0.5, 1.0
    prob = lti_problem(LtiSystem([[a]], [[b]]), 1, R=[[R]], r_x=[[r]], x1=[x1])
    x, u = dense_kkt_solve(prob)
    assert u[0, 0] == pytest.approx(b * (r - a * x1) / (b * b + R))
    assert x[0, 0] == pytest.approx(a * x1 + b * u[0, 0])
    assert kkt_residual(prob, x, u) <= 1e-12


def test_kkt_residual_detects_suboptimal():
    prob = random_problem(2, bounded=False)
    x, u = dense_kkt_solve(prob)
    u2 = u + 1e-3
    assert kkt_residual(prob, prob.simulate(u2), u2) > 1e-5


def test_reference_solve_bounded():
    prob = random_problem(5)
    ref = reference_solve(prob)
    assert ref.kkt_residual <= 1e-7
    assert np.all(np.abs(ref.u) <= 1 + 1e-9)


def test_reference_solve_budget():
    with pytest.raises(OracleNotConverged):
        reference_solve(random_problem(5), max_iters=5)

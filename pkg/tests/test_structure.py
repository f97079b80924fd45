import numpy as np
import pytest
from hypothesis import given, strategies as st

from structadmm.errors import DimensionMismatch, Undefined, ZeroScale
from structadmm.generate import gen_cascade
from structadmm.problem import LtiSystem, Partition
from structadmm.structure import (analyze, check_controllable, check_semiconvergent, diagonal_transform,
                                  link_usage, separation_tendency)


def brute_gamma(A, B, K=4000):
    """Link usage by direct time stepping with explicit per-link loops."""
    nx, nu = B.shape
    dx = np.zeros(nx)
    acc = np.zeros((nx, nx + nu))
    for k in range(K):
        du = np.ones(nu) if k == 0 else (-np.ones(nu) if k == 1 else np.zeros(nu))
        new = np.zeros(nx)
        for i in range(nx):
            for j in range(nx):
                acc[i, j] += (A[i, j] * dx[j]) ** 2
                new[i] += A[i, j] * dx[j]
            for j in range(nu):
                acc[i, nx + j] += (B[i, j] * du[j]) ** 2
                new[i] += B[i, j] * du[j]
        dx = new
    return np.sqrt(acc)


def test_two_state_example_link_usage(two_state_example):
    system, part = two_state_example
    flow, gam = link_usage(system)
    h = 0.5
    assert np.allclose(gam.Gamma, [[h, h, np.sqrt(2)], [h, h, np.sqrt(2)]], atol=1e-12)
    assert flow.converged
    # first flow steps by hand
    assert np.allclose(flow.Phi[0], [[0, 0, 1], [0, 0, 1]])
    assert np.allclose(flow.Phi[1], [[h, h, -1], [h, h, -1]])
    _, rep = analyze(system, part)
    assert rep.s == pytest.approx(0.5)
    assert not rep.structured


def test_fully_decoupled_is_one():
    system = LtiSystem(np.diag([0.5, 0.3]), np.eye(2))
    _, rep = analyze(system, Partition((1, 1), (1, 1)))
    assert rep.s == pytest.approx(1.0)
    assert rep.structured


def test_zero_internal_is_zero():
    # each state is driven only by the other block
    system = LtiSystem([[0.0, 0.5], [0.5, 0.0]], [[0.0, 1.0], [1.0, 0.0]])
    _, rep = analyze(system, Partition((1, 1), (1, 1)))
    assert rep.s == pytest.approx(0.0)


def test_zero_row_is_undefined():
    system = LtiSystem([[0.5, 0.0], [0.0, 0.0]], [[1.0], [0.0]])
    gam = link_usage(system)[1]
    with pytest.raises(Undefined):
        separation_tendency(gam, Partition((1, 1), (1, 0)))
    _, rep = analyze(system, Partition((1, 1), (1, 0)))
    assert rep.s is None and not rep.exists and rep.zero_rows == [1]


def test_partition_shape_checked(two_state_example):
    system, _ = two_state_example
    gam = link_usage(system)[1]
    with pytest.raises(DimensionMismatch):
        separation_tendency(gam, Partition((1, 2), (1, 0)))


def test_semiconvergence():
    assert check_semiconvergent(np.diag([0.5, 0.9]))
    assert check_semiconvergent(np.diag([1.0, 0.5]))
    assert not check_semiconvergent([[1.0, 1.0], [0.0, 1.0]])
    assert not check_semiconvergent(np.diag([-1.0, 0.5]))
    assert not check_semiconvergent(np.diag([1.1]))


def test_controllability():
    assert check_controllable(np.diag([0.5, 0.3]), np.ones((2, 1)))
    assert not check_controllable(np.diag([0.5, 0.5]), np.ones((2, 1)))
    assert not check_controllable(np.eye(2), np.zeros((2, 0)))
    # stable chain whose Krylov vectors decay fast
    n = 12
    A = 0.05 * np.diag(np.ones(n - 1), -1)
    B = np.zeros((n, 1))
    B[0] = 1
    assert check_controllable(A, B)


def test_cascade_is_structured():
    system, part = gen_cascade(20, 6, 1, 1, seed=0)
    _, rep = analyze(system, part)
    assert rep.s >= 0.9


def test_diagonal_transform():
    system = LtiSystem([[0.5, 0.2], [0.1, 0.3]], [[1.0], [2.0]])
    t = np.array([2.0, -1.0, 4.0])
    out = diagonal_transform(system, t)
    T = np.diag(t)
    big = np.block([[system.A, system.B]])
    assert np.allclose(out.A, np.linalg.inv(T[:2, :2]) @ system.A @ T[:2, :2])
    assert np.allclose(out.B, np.linalg.inv(T[:2, :2]) @ system.B @ T[2:, 2:])
    assert big.shape == (2, 3)
    with pytest.raises(ZeroScale):
        diagonal_transform(system, [1.0, 0.0, 1.0])
    with pytest.raises(DimensionMismatch):
        diagonal_transform(system, [1.0, 1.0])


@given(st.integers(0, 10_000))
def test_gamma_matches_brute_force(seed):
    rng = np.random.default_rng(seed)
    A = rng.standard_normal((3, 3))
    A *= 0.8 / max(abs(np.linalg.eigvals(A)))
    B = rng.standard_normal((3, 2))
    gam = link_usage(LtiSystem(A, B))[1]
    assert np.allclose(gam.Gamma, brute_gamma(A, B, 400), rtol=1e-9, atol=1e-12)


@given(st.integers(0, 10_000))
def test_tendency_bounds_and_uniform_scaling(seed):
    rng = np.random.default_rng(seed)
    A = rng.standard_normal((4, 4))
    A *= 0.9 / max(abs(np.linalg.eigvals(A)))
    B = rng.standard_normal((4, 2))
    system = LtiSystem(A, B)
    part = Partition((2, 2), (1, 1))
    _, rep = analyze(system, part)
    assert np.all((rep.s_i >= 0) & (rep.s_i <= 1))
    # a uniform state scaling with a unit input scaling leaves s unchanged
    c = float(rng.uniform(0.2, 5.0))
    _, rep2 = analyze(diagonal_transform(system, [c] * 4 + [1.0, 1.0]), part)
    assert rep2.s == pytest.approx(rep.s, abs=1e-9)

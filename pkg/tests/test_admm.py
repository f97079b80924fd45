import warnings

import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy.optimize import minimize

from structadmm.admm import (AdmmConfig, AdmmState, SolverCache, check_beta, dist, project_box, solve_conventional,
                             solve_structured, trace_rows)
from structadmm.errors import (BetaIgnoredWarning, InvalidBeta, InvalidConfig, NonConvergenceWarning,
                               ZeroReference)
from structadmm.generate import GenSpec, gen_category, wrap_mpc
from structadmm.oracle import dense_kkt_solve
from structadmm.problem import ConstraintSet, Partition, build_stacked

from conftest import random_problem


def scipy_solve(prob):
    """Independent oracle: condensed QP in u solved by SLSQP."""
    N, nu = prob.N, prob.nu

    def traj(v):
        u = v.reshape(N, nu)
        return prob.simulate(u), u

    def f(v):
        return prob.objective(*traj(v))

    cons = []
    if prob.Xset.kind == "box":
        lo, hi = prob.Xset.lower, prob.Xset.upper
        cons = [{"type": "ineq", "fun": lambda v: np.concatenate([(traj(v)[0] - lo).ravel(),
                                                                    (hi - traj(v)[0]).ravel()])}]
    bounds = None
    if prob.Uset.kind == "box":
        bounds = list(zip(np.tile(prob.Uset.lower, N), np.tile(prob.Uset.upper, N)))
    res = minimize(f, np.zeros(N * nu), method="SLSQP", bounds=bounds, constraints=cons,
                   options={"ftol": 1e-14, "maxiter": 1000})
    return traj(res.x)


def test_config_validation():
    with pytest.raises(InvalidConfig):
        AdmmConfig(rho=(0.0,))
    with pytest.raises(InvalidConfig):
        AdmmConfig(rho=(1.0, np.inf))
    with pytest.raises(InvalidBeta):
        AdmmConfig(beta=0.0)
    with pytest.raises(InvalidBeta):
        AdmmConfig(beta=1.5)
    cfg = AdmmConfig(rho=(2.0,), penalty_scale=3.0)
    assert np.array_equal(cfg.rho_vector(3), [6.0, 6.0, 6.0])
    assert cfg.effective_beta == 0.5
    with pytest.raises(InvalidConfig):
        AdmmConfig(rho=(1.0, 2.0)).rho_vector(3)


def test_check_beta():
    check_beta(1, 1.0)
    check_beta(3, 0.5)
    with pytest.raises(InvalidBeta):
        check_beta(2, 1.0)


def test_dist():
    assert dist([1.0, 1.0], [0.0], [1.0, 1.0], [0.0]) == 0.0
    assert dist([2.0], [0.0], [1.0], [0.0]) == pytest.approx(1.0)
    with pytest.raises(ZeroReference):
        dist([1.0], [1.0], [0.0], [0.0])


def test_project_box():
    box = ConstraintSet.box([-1.0, 0.0], [1.0, np.inf])
    assert np.array_equal(project_box(np.array([3.0, -2.0]), box), [1.0, 0.0])
    with pytest.raises(ValueError):
        project_box(np.zeros(1), ConstraintSet.custom(lambda z: z, 1))


def test_unconstrained_matches_dense_kkt():
    prob = random_problem(4, bounded=False)
    pp = build_stacked(prob, Partition.trivial(4, 2))
    x_ref, u_ref = dense_kkt_solve(prob)
    sol = solve_conventional(pp, AdmmConfig(rho=(1.0,), tol_primal=1e-11, tol_dual=1e-11, max_iters=50000))
    assert sol.converged
    assert np.allclose(sol.x, x_ref, atol=1e-8) and np.allclose(sol.u, u_ref, atol=1e-8)


def test_structured_matches_independent_oracle():
    prob = random_problem(7)
    x_ref, u_ref = scipy_solve(prob)
    pp = build_stacked(prob, Partition((2, 2), (1, 1)))
    sol = solve_structured(pp, AdmmConfig(rho=(1.0,), beta=0.5, tol_primal=1e-10, tol_dual=1e-10,
                                          max_iters=100000))
    assert sol.converged
    assert dist(sol.x, sol.u, x_ref, u_ref) <= 1e-9


def test_conventional_rejects_partition(small_problem):
    pp = build_stacked(small_problem, Partition((2, 2), (1, 1)))
    with pytest.raises(InvalidConfig):
        solve_conventional(pp, AdmmConfig())


def test_conventional_warns_on_beta(small_problem):
    pp = build_stacked(small_problem, Partition.trivial(4, 2))
    with pytest.warns(BetaIgnoredWarning):
        solve_conventional(pp, AdmmConfig(beta=0.3, max_iters=3000, tol_primal=1e-6, tol_dual=1e-6))


def test_nonconvergence_warning(small_problem):
    pp = build_stacked(small_problem, Partition((2, 2), (1, 1)))
    with pytest.warns(NonConvergenceWarning):
        sol = solve_structured(pp, AdmmConfig(max_iters=3))
    assert not sol.converged and sol.status == "max_iters" and sol.iterations == 3


def test_structured_beta_one_requires_single_subsystem(small_problem):
    pp = build_stacked(small_problem, Partition((2, 2), (1, 1)))
    with pytest.raises(InvalidBeta):
        solve_structured(pp, AdmmConfig(beta=1.0))


def test_zero_reference_rejected(small_problem):
    pp = build_stacked(small_problem, Partition.trivial(4, 2))
    with pytest.raises(ZeroReference):
        solve_conventional(pp, AdmmConfig(), reference=(np.zeros((5, 4)), np.zeros((5, 2))))


def test_dist_target_stops_early(small_problem):
    pp = build_stacked(small_problem, Partition.trivial(4, 2))
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", NonConvergenceWarning)
        ref = solve_conventional(pp, AdmmConfig(max_iters=20000, tol_primal=1e-11, tol_dual=1e-11))
    pp2 = build_stacked(small_problem, Partition((2, 2), (1, 1)))
    sol = solve_structured(pp2, AdmmConfig(dist_target=1e-4), reference=ref)
    assert sol.converged and sol.dist_history[-1] <= 1e-4
    assert np.all(sol.dist_history[:-1] > 1e-4)


def test_trace_columns(small_problem):
    pp = build_stacked(small_problem, Partition((2, 2), (1, 1)))
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", NonConvergenceWarning)
        sol = solve_structured(pp, AdmmConfig(max_iters=5), ops_per_iter=7)
    rows = trace_rows(sol.trace)
    assert [r[0] for r in rows] == [1, 2, 3, 4, 5]
    assert [r[5] for r in rows] == [7, 14, 21, 28, 35]
    assert sol.trace[0]._fields == ("iter", "r_zeta", "r_eps", "objective", "dist", "cum_ops")


def test_dynamics_step_is_projection_onto_affine_set(lower_banded):
    prob, part = lower_banded
    pp = build_stacked(prob, part)
    cache = SolverCache(pp, [1.0, 2.0, 3.0], beta=0.5)
    rng = np.random.default_rng(0)
    g = rng.standard_normal(pp.ny)
    y = cache.dynamics_step(g + cache.mq)
    for s, rho in zip(pp.subsystems, [1.0, 2.0, 3.0]):
        sl = slice(s.offset, s.offset + s.ny)
        assert np.allclose(s.C @ y[sl], s.c, atol=1e-10)
        # KKT of min 1/2 y'Qy + q'y + rho/2 |y - g|^2 s.t. C y = c
        n, m = s.ny, s.C.shape[0]
        K = np.block([[s.Qcal + rho * np.eye(n), s.C.T], [s.C, np.zeros((m, m))]])
        sol = np.linalg.solve(K, np.concatenate([rho * g[sl] - s.q, s.c]))
        assert np.allclose(y[sl], sol[:n], atol=1e-9)


def test_coupling_step_is_weighted_projection(lower_banded):
    prob, part = lower_banded
    pp = build_stacked(prob, part)
    rho = [1.0, 2.0, 3.0]
    cache = SolverCache(pp, rho, beta=0.5)
    rng = np.random.default_rng(1)
    z = rng.standard_normal(pp.ny)
    e = cache.couple(z)
    D = pp.D.toarray()
    assert np.max(np.abs(D @ e - pp.d)) <= 1e-10
    # weighted least squares with weights (1 - beta) rho
    W = 0.5 * cache.rho_full
    Winv = 1.0 / W
    lam = np.linalg.solve((D * Winv) @ D.T, D @ z - pp.d)
    assert np.allclose(e, z - Winv * (D.T @ lam), atol=1e-9)


@given(st.integers(0, 10_000))
def test_single_subsystem_reduction(seed):
    prob = random_problem(seed, N=4)
    pp = build_stacked(prob, Partition.trivial(4, 2))
    cfg = AdmmConfig(rho=(1.3,), beta=1.0, max_iters=30, tol_primal=0, tol_dual=0)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        a = solve_conventional(pp, AdmmConfig(rho=(1.3,), max_iters=30, tol_primal=0, tol_dual=0))
        b = solve_structured(pp, cfg)
    assert np.allclose(a.state.y, b.state.y, rtol=1e-12, atol=1e-12)
    assert np.allclose(a.state.lambda_zeta, b.state.lambda_zeta, rtol=1e-12, atol=1e-12)


@given(st.integers(0, 10_000), st.sampled_from(["lower_banded", "full", "sparse", "star"]))
def test_iterate_invariants(seed, category):
    system, part = gen_category(GenSpec(category, (2, 2, 1), (1, 1, 1), seed=seed % 50))
    prob = wrap_mpc(system, 4, seed=seed)
    pp = build_stacked(prob, part)
    lower = np.concatenate([s.lower for s in pp.subsystems])
    upper = np.concatenate([s.upper for s in pp.subsystems])
    D = pp.D.toarray()
    bad = []

    def check(st_: AdmmState):
        for s in pp.subsystems:
            sl = slice(s.offset, s.offset + s.ny)
            if np.max(np.abs(s.C @ st_.y[sl] - s.c), initial=0) > 1e-9:
                bad.append("dyn")
        if np.any(st_.zeta < lower - 1e-12) or np.any(st_.zeta > upper + 1e-12):
            bad.append("box")
        if D.shape[0] and np.max(np.abs(D @ st_.eps - pp.d)) > 1e-9:
            bad.append("coupling")

    with warnings.catch_warnings():
        warnings.simplefilter("ignore", NonConvergenceWarning)
        solve_structured(pp, AdmmConfig(max_iters=40), callback=check)
    assert not bad

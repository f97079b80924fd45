import warnings

import numpy as np
import pytest

from structadmm.bench import (CascadeConfig, StudyConfig, cascade_convergence, cascade_setup, convergence_curves,
                              growth_curves, run_study)
from structadmm.errors import InvalidBeta, InvalidConfig
from structadmm.runner import RhoPolicy, solve_problem

from conftest import random_problem


def test_rho_policy_parse():
    assert RhoPolicy.parse("unit") == RhoPolicy("unit")
    assert RhoPolicy.parse(" Optimal ") == RhoPolicy("optimal", 1.0)
    assert RhoPolicy.parse("scale=90") == RhoPolicy("optimal", 90.0)
    assert str(RhoPolicy.parse("scale=2.5")) == "scale=2.5"
    for bad in ("scale=0", "scale=-1", "fast"):
        with pytest.raises(InvalidConfig):
            RhoPolicy.parse(bad)


def test_solve_problem_paths():
    from structadmm.problem import Partition
    prob = random_problem(0)
    part = Partition((2, 2), (1, 1))
    a = solve_problem(prob, part, algo="conventional", rho=RhoPolicy.parse("optimal"), max_iters=50000)
    b = solve_problem(prob, part, algo="structured", threads="2MN", max_iters=50000)
    assert a.solution.converged and b.solution.converged
    assert a.pp.M == 1 and b.pp.M == 2 and b.beta == 0.5
    assert np.allclose(a.solution.u, b.solution.u, atol=1e-5)
    assert b.solution.trace[-1].cum_ops == b.solution.iterations * b.ops_per_iter
    with pytest.raises(InvalidBeta):
        solve_problem(prob, part, beta=1.0)
    with pytest.raises(InvalidConfig):
        solve_problem(prob, part, algo="newton")


def test_convergence_curves_equal_budget():
    hist = {"a": [np.array([1.0, 0.1, 0.01])], "b": [np.array([1.0, 0.5, 0.25, 0.125, 0.0625])]}
    c = convergence_curves(hist, {"a": 10, "b": 5}, floor=1e-14, points=20)
    j = int(np.nonzero(c.budgets == 10)[0][0])
    assert c.median["a"][j] == pytest.approx(0.1)
    assert c.median["b"][j] == pytest.approx(0.25)
    # beyond the recorded length the last value is held
    assert c.median["a"][-1] == pytest.approx(0.01)


def test_small_cascade_run():
    cfg = CascadeConfig(S=3, x_i=3, scenarios=2, max_iters=3000, budget_points=10)
    setup = cascade_setup(cfg)
    res = cascade_convergence(cfg, setup)
    assert len(res.histories["i"]) + len(res.skipped) == 2
    assert res.histories["iii"] is res.histories["ii"]
    assert setup.report.costs["iii"] < setup.report.costs["ii"]


def test_growth_rows():
    rows = growth_curves(range(1, 4), N=3)
    assert [r.M for r in rows] == [1, 2, 3] and rows[-1].x == 6
    assert set(rows[0].table) == {"#1", "#2", "#3", "#4", "#5"}
    for r in rows:
        assert r.measured["iii"] <= r.measured["ii"]


def test_tiny_study():
    cfg = StudyConfig(categories=("lower_banded", "full"), dims=((5, 2),), seeds=2, initial_conditions=2,
                      max_iters=20000)
    res = run_study(cfg)
    assert len(res.rows) + len(res.skipped) == 4
    for r in res.rows:
        assert 0 <= r.s <= 1 and r.increase > 0
    assert "spearman" in res.metadata()
    with pytest.raises(ValueError):
        StudyConfig(dist_target=2.0)

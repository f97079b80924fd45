import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from structadmm.generate import example_unstructured, gen_category, GenSpec, wrap_mpc
from structadmm.problem import ConstraintSet, LtiSystem, MpcProblem, Partition

settings.register_profile("default", max_examples=25, deadline=None,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")


def random_problem(seed, nx=4, nu=2, N=5, bounded=True, stable=0.9):
    """Small random box-constrained tracking problem."""
    rng = np.random.default_rng(seed)
    A = rng.standard_normal((nx, nx))
    A *= stable / max(abs(np.linalg.eigvals(A)))
    B = rng.standard_normal((nx, nu))
    kw = {}
    if bounded:
        kw = dict(Xset=ConstraintSet.box(-2 * np.ones(nx), 2 * np.ones(nx)),
                  Uset=ConstraintSet.box(-np.ones(nu), np.ones(nu)))
    return MpcProblem(LtiSystem(A, B), N, np.eye(nx), 0.5 * np.eye(nu),
                      rng.standard_normal((N, nx)), np.zeros((N, nu)), rng.standard_normal(nx), **kw)


@pytest.fixture
def two_state_example():
    return example_unstructured()


@pytest.fixture
def small_problem():
    return random_problem(0)


@pytest.fixture
def lower_banded():
    system, part = gen_category(GenSpec("lower_banded", (2, 2, 2), (1, 1, 1), seed=3))
    return wrap_mpc(system, 5, seed=3), part

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from stochsdp.core import ProblemData, ScenarioSet, Spectrahedron
from stochsdp.instances import random_instance
from stochsdp.recourse import (
    AssumptionError,
    RecourseOracle,
    check_A1,
    check_A2,
    dual_slack,
    eval_f,
    eval_phi,
    lipschitz_bound,
    subgrad_QE,
)

from .conftest import diag_recourse


def test_A2_diag():
    r = check_A2(diag_recourse())
    assert r.holds
    assert r.margin == pytest.approx(1.0, abs=1e-7)
    assert np.allclose(r.witness, [0.0], atol=1e-6)


def test_A2_example1(example1):
    r = check_A2(example1)
    assert not r.holds
    assert abs(r.margin) < 1e-6


def test_A2_zero_cost():
    # q = 0 with a complete-recourse W: only u = 0 keeps the slack PSD
    r = check_A2(diag_recourse().with_(q=np.zeros((2, 2))))
    assert not r.holds and r.margin <= 1e-7


def test_A1_diag():
    r = check_A1(diag_recourse())
    assert r.holds
    assert max(abs(v) for v in r.optima) < 1e-7


def test_A1_example1_forced(example1):
    with pytest.raises(AssumptionError):
        check_A1(example1)
    assert check_A1(example1, force=True).holds


def test_A1_identity_recourse_unbounded():
    p = ProblemData(c=np.eye(1), q=np.eye(3), T=[np.eye(1)], W=[np.eye(3)], X=Spectrahedron.trace_ball(1, 1.0))
    r = check_A1(p)
    assert not r.holds
    assert np.allclose(r.direction, [-1.0], atol=1e-6)


def test_phi_diag_values():
    o = RecourseOracle.verified(diag_recourse())
    v, info = eval_phi(o, [3.0])
    assert v == pytest.approx(3.0, abs=1e-8)
    assert np.allclose(info.u, [1.0], atol=1e-7)
    assert info.unique
    v, info = eval_phi(o, [0.0])
    assert abs(v) < 1e-8
    assert not info.unique


def test_phi_example1_with_override(example1):
    o = RecourseOracle(example1, override=True)
    v, info = eval_phi(o, [5.0])
    assert abs(v) < 1e-6
    assert np.allclose(info.u, [0.0], atol=1e-6)


def test_unverified_oracle_refuses(example1):
    o = RecourseOracle(example1)
    with pytest.raises(AssumptionError):
        o.phi([1.0])
    assert not o.verify()
    with pytest.raises(AssumptionError):
        o.values([[1.0]])


def test_lipschitz_examples(example1):
    assert lipschitz_bound(RecourseOracle.verified(diag_recourse())) == pytest.approx(1.0, abs=1e-7)
    assert lipschitz_bound(RecourseOracle(example1, override=True)) < 1e-6
    assert lipschitz_bound(RecourseOracle.verified(diag_recourse(W_scale=2.0))) == pytest.approx(0.5, abs=1e-7)


def test_eval_f_examples():
    n = 3
    o = RecourseOracle.verified(diag_recourse(n=n, c=np.eye(n)))
    assert eval_f(o, np.eye(n), [2.0]) == pytest.approx(n + 2, abs=1e-7)
    T = [np.diag([1.0, 0.0, 2.0])]
    o = RecourseOracle.verified(diag_recourse(n=n, T=T))
    x = np.diag([0.3, 0.1, 0.2])
    assert abs(eval_f(o, x, [0.7])) < 1e-8


def test_subgradient_examples():
    n = 2
    c = np.array([[1.0, 0.2], [0.2, 0.5]])
    x = 0.25 * np.eye(n)
    sc = ScenarioSet.from_pairs([(1.0, [3.0])])
    o = RecourseOracle.verified(diag_recourse(n=n, c=c))
    assert np.allclose(subgrad_QE(o, sc, x).array, c, atol=1e-7)
    o = RecourseOracle.verified(diag_recourse(n=n, c=c, T=[np.eye(n)]))
    assert np.allclose(subgrad_QE(o, sc, x).array, c - np.eye(n), atol=1e-7)
    opposite = ScenarioSet.from_pairs([(0.5, [3.0]), (0.5, [-3.0])])
    assert np.allclose(subgrad_QE(o, opposite, x).array, c, atol=1e-7)


def test_costs_grid_matches_pointwise(rng):
    p, sc = random_instance(rng, n=2, m=3, s=2, S=4)
    o = RecourseOracle.verified(p)
    xs = np.stack([np.eye(2) * a for a in (0.0, 0.3, 0.9)])
    grid = o.costs_grid(sc, xs)
    for k, x in enumerate(xs):
        assert np.allclose(grid[k], o.costs(sc, x), atol=1e-10)
        for i, (_, z) in enumerate(sc):
            assert grid[k, i] + p.c.inner(x) == pytest.approx(eval_f(o, x, z), abs=1e-8)


@pytest.fixture(scope="module")
def rand_oracle():
    p, _ = random_instance(np.random.default_rng(77), n=2, m=3, s=3)
    return RecourseOracle.verified(p)


vec3 = st.lists(st.floats(-5, 5), min_size=3, max_size=3).map(np.array)


@given(vec3, vec3, st.floats(0, 1))
def test_phi_convex(rand_oracle, a, b, lam):
    v = rand_oracle.values(np.stack([a, b, lam * a + (1 - lam) * b]))
    assert v[2] <= lam * v[0] + (1 - lam) * v[1] + 1e-7


@given(vec3, st.floats(0, 10))
def test_phi_homogeneous(rand_oracle, a, lam):
    v = rand_oracle.values(np.stack([a, lam * a]))
    assert v[1] == pytest.approx(lam * v[0], abs=1e-7 * (1 + lam))


@given(vec3, vec3)
def test_phi_lipschitz_and_dual_feasible(rand_oracle, a, b):
    L = rand_oracle.lipschitz_bound()
    v = rand_oracle.values(np.stack([a, b]))
    assert abs(v[0] - v[1]) <= L * np.linalg.norm(a - b) + 1e-7
    _, info = rand_oracle.phi(a)
    assert np.linalg.eigvalsh(dual_slack(rand_oracle.problem, info.u))[0] >= -1e-7


@pytest.mark.parametrize("m,s", [(2, 1), (3, 2), (4, 3), (4, 1)])
def test_diag_family_bounded(m, s):
    from stochsdp.instances import diag_family

    rng = np.random.default_rng(m * 10 + s)
    for _ in range(3):
        assert check_A1(diag_family(rng, m, s)).holds


def test_diag_family_needs_enough_positions():
    from stochsdp.instances import diag_family

    with pytest.raises(ValueError):
        diag_family(np.random.default_rng(0), 2, 2)

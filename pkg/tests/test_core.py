import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from stochsdp.core import (
    DimensionError,
    MatrixTuple,
    ProblemData,
    ScenarioSet,
    Spectrahedron,
    SymMatrix,
    frobenius_norm,
    frobenius_pair,
    validate_problem,
)
from stochsdp.instances import diag_instance, nonattainment_instance

OFF = [[0, 0.5], [0.5, 0]]


def test_pairing_off_diagonal_with_identity():
    assert np.allclose(frobenius_pair(MatrixTuple([OFF]), np.eye(2)), [0.0])


def test_pairing_recovers_off_diagonal():
    assert np.allclose(frobenius_pair(MatrixTuple([OFF]), [[2, 1], [1, 2]]), [1.0])


def test_pairing_two_blocks():
    A = MatrixTuple([np.eye(2), 2 * np.eye(2)])
    assert np.allclose(frobenius_pair(A, np.diag([1.0, 3.0])), [4.0, 8.0])


def test_norms():
    assert frobenius_norm(np.eye(2)) == pytest.approx(math.sqrt(2))
    assert frobenius_norm(np.zeros((3, 3))) == 0.0
    assert frobenius_norm([[3, 4], [4, 3]]) == pytest.approx(math.sqrt(50))


def test_symmatrix_rejects_asymmetric():
    with pytest.raises(ValueError):
        SymMatrix([[1, 2], [0, 1]])
    s = SymMatrix.symmetrize([[1, 2], [0, 1]])
    assert np.allclose(s.array, [[1, 1], [1, 1]])


def test_matrix_tuple_dims_must_agree():
    with pytest.raises(DimensionError):
        MatrixTuple([np.eye(2), np.eye(3)])


def test_adjoint_is_transpose_of_pairing(rng):
    A = MatrixTuple([SymMatrix.symmetrize(rng.standard_normal((3, 3))) for _ in range(4)])
    x = SymMatrix.symmetrize(rng.standard_normal((3, 3)))
    u = rng.standard_normal(4)
    assert u @ frobenius_pair(A, x) == pytest.approx(np.vdot(A.adjoint(u), x.array))


sym3 = st.lists(st.floats(-10, 10), min_size=6, max_size=6).map(
    lambda v: np.array([[v[0], v[1], v[2]], [v[1], v[3], v[4]], [v[2], v[4], v[5]]])
)


@given(sym3, sym3)
def test_pairing_symmetric_and_norm_consistent(a, b):
    ab = frobenius_pair(MatrixTuple([a]), b)[0]
    ba = frobenius_pair(MatrixTuple([b]), a)[0]
    assert ab == pytest.approx(ba, abs=1e-9)
    assert frobenius_norm(a) ** 2 == pytest.approx(frobenius_pair(MatrixTuple([a]), a)[0], rel=1e-12, abs=1e-12)
    assert abs(ab) <= frobenius_norm(a) * frobenius_norm(b) + 1e-9


def test_validate_example1_clean():
    p = nonattainment_instance()
    sc = ScenarioSet.from_pairs([(0.5, [1.0]), (0.5, [-2.0])])
    assert validate_problem(p, sc).ok


def test_validate_probability_sum():
    p = nonattainment_instance()
    sc = ScenarioSet(np.array([0.6, 0.6]), np.array([[1.0], [2.0]]))
    rep = validate_problem(p, sc)
    assert not rep.ok
    assert any("probabilities sum to 1.2" in e for e in rep.errors)


def test_validate_dimension_mismatch():
    p = nonattainment_instance().with_(T=[np.zeros((3, 3))])
    rep = validate_problem(p)
    assert any(e.startswith("dimension mismatch") for e in rep.errors)


def test_scenarios_renormalize():
    sc = ScenarioSet.from_pairs([(0.25, [1.0]), (0.75, [2.0])])
    assert sc.S == 2 and sc.dim == 1
    assert [p for p, _ in sc] == [0.25, 0.75]


def test_spectrahedron_contains():
    X = Spectrahedron.trace_ball(2, 1.0)
    assert X.contains(np.diag([0.5, 0.5]))
    assert not X.contains(np.diag([1.0, 0.5]))
    assert not X.contains(np.diag([-0.1, 0.5]))
    assert X.radius_bound() == 1.0
    with pytest.raises(ValueError):
        Spectrahedron.psd_cone(2).radius_bound()


def test_diag_instance_shape():
    p, sc = diag_instance()
    assert (p.n, p.m, p.s, sc.S) == (2, 2, 1, 3)

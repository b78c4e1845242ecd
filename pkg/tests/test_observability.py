import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from hypothesis.extra.numpy import arrays

from reluobs.exceptions import DimensionError, KinkProximityError
from reluobs.fnn import InputSequence
from reluobs.input_design import canonical_B, design_input, sample_B
from reluobs.observability import (
    default_rel_tol,
    indicator_matrix,
    input_block_matrix,
    jacobian,
    jacobian_fd_check,
    numerical_rank,
    rank_condition,
)

from conftest import random_nonsingular


def loop_jacobian(W, U):
    """Row i, node j block: u_i if w_j . u_i > 0 else zeros."""
    m, n = W.shape
    J = np.zeros((len(U), m * n))
    for i, u in enumerate(U):
        for j in range(n):
            if float(np.dot(W[:, j], u)) > 0:
                J[i, j * m:(j + 1) * m] = u
    return J


@pytest.mark.parametrize("sv, tol, expected", [
    ((5, 3, 1e-15), 1e-9, 2),
    ((0, 0, 0), 1e-9, 0),
    ((1, 1, 1), 1e-9, 3),
    ((), 1e-9, 0),
])
def test_numerical_rank(sv, tol, expected):
    assert numerical_rank(np.array(sv, dtype=float), tol) == expected


def test_jacobian_scalar_example():
    b = jacobian([[1.0]], [[1.0], [-1.0]])
    np.testing.assert_array_equal(b.J, [[1.0], [0.0]])
    np.testing.assert_array_equal(b.T_chi, [[1], [0]])
    assert b.numerical_rank == 1


def test_jacobian_canonical_identity_is_block_diagonal():
    tpl = canonical_B(3)
    b = jacobian(np.eye(3), tpl.B)
    for k in range(3):
        for j in range(3):
            blk = b.J[3 * k:3 * k + 3, 3 * j:3 * j + 3]
            if j == k:
                np.testing.assert_array_equal(blk, tpl.block(k))
            else:
                assert np.all(blk == 0)
    assert b.numerical_rank == 9


def test_jacobian_paper_design(paper_W, paper_design):
    _, inputs = paper_design
    b = jacobian(paper_W, inputs, rel_tol=1e-9)
    assert b.numerical_rank == 9
    # independent confirmation from the loop oracle's spectrum
    sv = np.linalg.svd(loop_jacobian(paper_W, inputs.U), compute_uv=False)
    assert np.all(sv > 1e-9 * sv[0])
    np.testing.assert_array_equal(b.J, loop_jacobian(paper_W, inputs.U))


def test_jacobian_dimension_mismatch():
    with pytest.raises(DimensionError):
        jacobian(np.eye(3), np.ones((9, 2)))


def test_bundle_shapes_and_default_tol():
    rng = np.random.default_rng(0)
    W, U = rng.standard_normal((2, 3)), rng.standard_normal((7, 2))
    b = jacobian(W, U)
    assert b.J.shape == (7, 6)
    assert b.T_u.shape == (7, 14)
    assert b.rel_tol == default_rel_tol(7, 6)
    assert np.all(np.diff(b.singular_values) <= 0)
    assert b.numerical_rank <= 6


def test_input_block_matrix():
    T_u = input_block_matrix([[1.0, 2.0], [3.0, 4.0]])
    np.testing.assert_array_equal(T_u, [[1, 2, 0, 0], [0, 0, 3, 4]])


def test_rank_condition_same_sign_scalar_fails():
    rng = np.random.default_rng(1)
    for sign in (1, -1):
        W = sign * rng.uniform(0.1, 2.0, size=(1, 3))
        holds, b = rank_condition(W, rng.standard_normal((20, 1)))
        assert not holds
        assert b.numerical_rank <= 1


def test_rank_condition_paper(paper_W, paper_design):
    holds, b = rank_condition(paper_W, paper_design[1])
    assert holds and b.numerical_rank == 9


def test_rank_condition_mismatched_design_recorded():
    # U designed for a different W; no guarantee, but the verdict is reported
    rng = np.random.default_rng(3)
    W_other = random_nonsingular(rng, 3)
    U = design_input(W_other, sample_B(np.eye(3, dtype=int), seed=1))
    W_sing = np.array([[1.0, 1.0, 0.2], [0.5, 0.5, -0.3], [2.0, 2.0, 1.0]])
    holds, b = rank_condition(W_sing, U)
    assert isinstance(holds, bool)
    assert b.numerical_rank <= 9
    # identical columns make the two nodes' Jacobian blocks coincide
    assert not holds


def test_rank_impossible_with_too_few_rows():
    rng = np.random.default_rng(4)
    for N in range(1, 9):
        holds, _ = rank_condition(random_nonsingular(rng, 3), rng.standard_normal((N, 3)))
        assert not holds


def test_indicator_consistency():
    rng = np.random.default_rng(5)
    W, U = rng.standard_normal((3, 4)), rng.standard_normal((10, 3))
    T = indicator_matrix(W, U)
    for i, u in enumerate(U):
        np.testing.assert_array_equal(T[i], (u @ W > 0).astype(int))


@settings(max_examples=40, deadline=None)
@given(arrays(np.float64, (8, 2), elements=st.floats(-5, 5)), st.floats(1e-2, 1e2))
def test_scaling_invariance(U, c):
    W = np.array([[1.0, -0.4], [0.3, 0.9]])
    b1, b2 = jacobian(W, U), jacobian(W, c * U)
    np.testing.assert_array_equal(b1.T_chi, b2.T_chi)
    np.testing.assert_allclose(b2.J, c * b1.J, rtol=1e-12, atol=0)
    assert b1.numerical_rank == b2.numerical_rank


def test_fd_check_examples(paper_W, paper_design):
    assert jacobian_fd_check(np.eye(2), [[1.0, 1.0]], h=1e-6) < 1e-6
    assert jacobian_fd_check(paper_W, paper_design[1], h=1e-6) < 1e-5


def test_fd_check_rejects_kink():
    with pytest.raises(KinkProximityError) as exc:
        jacobian_fd_check(np.eye(2), [[1.0, 0.0]], h=1e-6)
    assert exc.value.pair == (0, 1)
    with pytest.raises(ValueError):
        jacobian_fd_check(np.eye(2), [[1.0, 1.0]], h=0)


def test_input_sequence_accepted():
    b = jacobian(np.eye(2), InputSequence([[1.0, 2.0]]))
    assert b.N == 1 and b.n_states == 4

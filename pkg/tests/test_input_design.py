import numpy as np
import pytest

from reluobs.exceptions import DesignError, DimensionError, SingularWeightsError
from reluobs.fnn import indicator
from reluobs.input_design import (
    DesignTemplate,
    canonical_B,
    design_input,
    is_valid_T,
    pattern_kron,
    sample_B,
    sample_T,
    validate_template,
)
from reluobs.observability import jacobian, rank_condition

from conftest import random_nonsingular


def test_canonical_block_n3():
    tpl = canonical_B(3)
    np.testing.assert_array_equal(tpl.block(0), [[1, 0, 0], [1, -1, 0], [1, 0, -1]])
    np.testing.assert_array_equal(indicator(tpl.block(0)), [[1, 0, 0]] * 3)
    np.testing.assert_array_equal(tpl.T, np.eye(3))


def test_canonical_n1():
    tpl = canonical_B(1)
    np.testing.assert_array_equal(tpl.B, [[1.0]])
    np.testing.assert_array_equal(tpl.T, [[1]])


@pytest.mark.parametrize("n", range(1, 9))
def test_canonical_is_valid_template(n):
    tpl = canonical_B(n)
    assert validate_template(tpl)
    np.testing.assert_array_equal(indicator(tpl.B), pattern_kron(np.eye(n, dtype=int)))


def test_pattern_kron():
    T = np.array([[0, 1], [1, 1]])
    np.testing.assert_array_equal(pattern_kron(T), [[0, 1], [0, 1], [1, 1], [1, 1]])


def test_T_validity(paper_T):
    assert is_valid_T(paper_T)
    assert is_valid_T(np.eye(4, dtype=int))
    assert not is_valid_T(np.ones((3, 3), dtype=int))
    assert not is_valid_T(np.array([[2, 0], [0, 1]]))


def test_sample_T_deterministic():
    for n in (1, 2, 3, 5):
        T = sample_T(n, seed=11)
        assert is_valid_T(T)
        np.testing.assert_array_equal(T, sample_T(n, seed=11))


def test_sample_B_identity_pattern():
    tpl = sample_B(np.eye(3, dtype=int), seed=0)
    for k, Bk in enumerate(tpl.blocks):
        assert np.all(Bk[:, k] > 0)
        assert np.all(np.delete(Bk, k, axis=1) < 0)
    np.testing.assert_array_equal(indicator(tpl.B), pattern_kron(np.eye(3, dtype=int)))


def test_sample_B_magnitudes_and_n1():
    tpl = sample_B([[1]], magnitude_range=(0.2, 0.3), seed=2)
    assert 0.2 <= tpl.B[0, 0] <= 0.3
    tpl = sample_B(np.eye(4, dtype=int), magnitude_range=(0.5, 2.0), seed=2)
    assert np.all((np.abs(tpl.B) >= 0.5) & (np.abs(tpl.B) <= 2.0))


def test_sample_B_paper_T_valid(paper_T):
    for seed in range(20):
        assert validate_template(sample_B(paper_T, seed=seed))


def test_sample_B_rejects_bad_input(paper_T):
    with pytest.raises(DesignError):
        sample_B(np.ones((3, 3), dtype=int))
    with pytest.raises(ValueError):
        sample_B(paper_T, magnitude_range=(0.0, 1.0))


def test_validate_template_failures():
    tpl = canonical_B(3)
    B = tpl.B.copy()
    B[3:6] = 0.0
    check = validate_template(DesignTemplate(tpl.T, B))
    assert not check and check.condition == "rank"

    B = tpl.B.copy()
    B[4, 1] = -B[4, 1]  # block 2, pattern column flipped to non-positive
    check = validate_template(DesignTemplate(tpl.T, B))
    assert not check and check.condition == "indicator"

    check = validate_template(DesignTemplate(np.ones((3, 3), dtype=int), tpl.B))
    assert not check and check.condition == "T"


def test_template_shape_checked():
    with pytest.raises(DimensionError):
        DesignTemplate(np.eye(2), np.ones((3, 2)))


def test_design_identity_gives_B():
    tpl = canonical_B(3)
    np.testing.assert_allclose(design_input(np.eye(3), tpl).U, tpl.B, atol=1e-15)


def test_design_paper(paper_W, paper_T):
    tpl = sample_B(paper_T, seed=3)
    inputs = design_input(paper_W, tpl)
    assert inputs.U.shape == (9, 3)
    assert rank_condition(paper_W, inputs).holds
    np.testing.assert_allclose(inputs.U @ paper_W, tpl.B, atol=1e-12)


@pytest.mark.parametrize("c", [0.01, 0.5, 3.0, 100.0])
def test_design_scaled_identity(c):
    tpl = sample_B(np.array([[1, 1, 0], [0, 1, 0], [0, 1, 1]]), seed=4)
    inputs = design_input(c * np.eye(3), tpl)
    np.testing.assert_allclose(inputs.U, tpl.B / c, rtol=1e-13)
    np.testing.assert_array_equal(indicator(inputs.U @ (c * np.eye(3))), pattern_kron(tpl.T))


def test_design_rejects_singular_and_nonsquare():
    W = np.array([[1.0, 1.0, 0.0], [2.0, 2.0, 1.0], [0.0, 0.0, 1.0]])
    with pytest.raises(SingularWeightsError, match="rank 2"):
        design_input(W, canonical_B(3))
    with pytest.raises(DesignError, match="square"):
        design_input(np.ones((2, 3)), canonical_B(3))
    with pytest.raises(DimensionError):
        design_input(np.eye(2), canonical_B(3))


def test_design_canonical_block_structure():
    rng = np.random.default_rng(8)
    for n in (2, 3, 4):
        W = random_nonsingular(rng, n)
        inputs = design_input(W, canonical_B(n))
        J = jacobian(W, inputs).J
        for k in range(n):
            for j in range(n):
                blk = J[k * n:(k + 1) * n, j * n:(j + 1) * n]
                if j == k:
                    np.testing.assert_array_equal(blk, inputs.U[k * n:(k + 1) * n])
                    assert np.linalg.matrix_rank(blk) == n
                else:
                    assert np.all(blk == 0)


@pytest.mark.parametrize("n", [2, 3, 4])
def test_end_to_end_random(n):
    rng = np.random.default_rng(100 + n)
    for t in range(100):
        W = random_nonsingular(rng, n)
        tpl = sample_B(sample_T(n, seed=[n, t]), seed=[n, t, 1])
        inputs = design_input(W, tpl)
        np.testing.assert_array_equal(indicator(inputs.U @ W), pattern_kron(tpl.T))
        assert rank_condition(W, inputs).holds


def test_canonical_zero_fallback_used_only_when_needed():
    from reluobs.input_design import design_with_template, perturb_zeros

    tpl = canonical_B(3)
    _, used = design_with_template(np.eye(3), tpl)
    assert used is tpl
    shifted = perturb_zeros(tpl)
    assert validate_template(shifted)
    assert np.all(shifted.B != 0)
    np.testing.assert_array_equal(indicator(shifted.B), indicator(tpl.B))

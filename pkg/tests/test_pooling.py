import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra import numpy as hnp

from vqpool.pooling import (
    WeightError,
    normalize_weights,
    pool_average,
    pool_statistics,
    pool_weighted,
)

matrices = hnp.arrays(
    np.float64,
    st.tuples(st.integers(1, 30), st.integers(1, 8)),
    elements=st.floats(-100, 100),
)


def test_uniform_weights_equal_mean():
    C = np.array([[1.0, 3.0], [3.0, 5.0]])
    out = pool_weighted(C, normalize_weights(np.array([1.0, 1.0])))
    np.testing.assert_allclose(out, [2.0, 4.0])


def test_single_frame_identity():
    C = np.array([[7.0, -2.0]])
    out = pool_weighted(C, normalize_weights(np.array([3.0])))
    np.testing.assert_allclose(out, C[0])


def test_zero_weight_excludes_frame():
    C = np.array([[1.0, 0.0], [0.0, 1.0], [5.0, 5.0]])
    out = pool_weighted(C, normalize_weights(np.array([1.0, 1.0, 0.0])))
    np.testing.assert_allclose(out, [0.5, 0.5])


def test_length_mismatch():
    with pytest.raises(ValueError, match="length"):
        pool_weighted(np.ones((3, 2)), normalize_weights(np.ones(2)))


def test_average_examples():
    np.testing.assert_allclose(pool_average(np.array([[2.0, 2.0], [4.0, 4.0]])), [3.0, 3.0])
    np.testing.assert_allclose(pool_average(np.array([[7.0]])), [7.0])


def test_average_permutation_invariant(rng):
    C = rng.normal(size=(11, 5))
    perm = rng.permutation(11)
    np.testing.assert_array_equal(pool_average(C), pool_average(C[perm]))


def test_statistics_hand_example():
    out = pool_statistics(np.array([[1.0, 3.0], [3.0, 5.0]]))
    np.testing.assert_allclose(out, [2.0, 4.0, 1.0, 1.0], atol=1e-6)


def test_statistics_constant_frames():
    out = pool_statistics(np.array([[5.0], [5.0], [5.0]]))
    assert out[0] == pytest.approx(5.0)
    assert out[1] == pytest.approx(1e-5, rel=1e-3)


def test_statistics_single_frame():
    out = pool_statistics(np.array([[2.0, -1.0]]))
    np.testing.assert_allclose(out[:2], [2.0, -1.0])
    np.testing.assert_allclose(out[2:], [1e-5, 1e-5], rtol=1e-3)


def test_statistics_permutation_invariant(rng):
    C = rng.normal(size=(9, 4))
    perm = rng.permutation(9)
    np.testing.assert_array_equal(pool_statistics(C), pool_statistics(C[perm]))


def test_normalize_examples():
    w = normalize_weights(np.array([2.0, 2.0]))
    assert w.zeta == pytest.approx(0.25)
    np.testing.assert_allclose(w.probabilities(), [0.5, 0.5])
    w = normalize_weights(np.array([1.0, 0.0, 3.0]))
    np.testing.assert_allclose(w.probabilities(), [0.25, 0.0, 0.75])


@pytest.mark.parametrize("bad", [[0.0, 0.0], [-1.0, 2.0], [np.nan, 1.0], [np.inf, 1.0]])
def test_normalize_rejects_invalid(bad):
    with pytest.raises(WeightError):
        normalize_weights(np.array(bad))


@settings(max_examples=50, deadline=None)
@given(matrices)
def test_average_equals_uniform_weighted_exactly(C):
    uniform = normalize_weights(np.ones(C.shape[0]))
    np.testing.assert_array_equal(pool_average(C), pool_weighted(C, uniform))


@settings(max_examples=50, deadline=None)
@given(matrices, st.integers(0, 2**32 - 1))
def test_weighted_is_linear_in_c(C, seed):
    rng = np.random.default_rng(seed)
    C2 = rng.normal(size=C.shape)
    w = normalize_weights(rng.uniform(0.1, 1.0, C.shape[0]))
    a, b = 0.7, -1.3
    lhs = pool_weighted(a * C + b * C2, w)
    rhs = a * pool_weighted(C, w).astype(np.float64) + b * pool_weighted(C2, w).astype(np.float64)
    np.testing.assert_allclose(lhs, rhs, rtol=1e-5, atol=1e-4)


@settings(max_examples=50, deadline=None)
@given(matrices, st.integers(0, 2**32 - 1))
def test_pooled_is_convex_combination(C, seed):
    rng = np.random.default_rng(seed)
    w = normalize_weights(rng.uniform(0.0, 1.0, C.shape[0]) + 1e-3)
    out = pool_weighted(C, w)
    lo = C.min(axis=0) - 1e-4
    hi = C.max(axis=0) + 1e-4
    assert (out >= lo).all() and (out <= hi).all()

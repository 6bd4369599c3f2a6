import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from ttflow.dense import (
    composite_index,
    frobenius_norm,
    relative_error,
    split_index,
    tensorize,
    unfold,
)


def brute_unfold(t, k):
    """Entry-by-entry unfolding straight from the composite-index formula."""
    shape = t.shape
    rows = int(np.prod(shape[:k]))
    cols = int(np.prod(shape[k:]))
    out = np.zeros((rows, cols))
    for idx in np.ndindex(*shape):
        r = composite_index(idx[:k], shape[:k])
        c = composite_index(idx[k:], shape[k:])
        out[r, c] = t[idx]
    return out


def test_unfold_matrix_is_identity_reshape():
    t = np.array([[0.0, 2.0], [1.0, 3.0]])     # t[i, j] = i + 2j
    assert np.array_equal(unfold(t, 1), t)


def test_unfold_3way_columns_are_fibers():
    rng = np.random.default_rng(0)
    t = rng.standard_normal((2, 2, 2))
    m = unfold(t, 1)
    assert m.shape == (2, 4)
    for c in range(4):
        j, k = c % 2, c // 2
        assert np.array_equal(m[:, c], t[:, j, k])


def test_unfold_matches_bruteforce_all_k():
    rng = np.random.default_rng(1)
    t = rng.standard_normal((3, 4, 5))
    for k in (1, 2):
        assert np.array_equal(unfold(t, k), brute_unfold(t, k))


def test_unfold_k_out_of_range():
    t = np.zeros((2, 2, 2))
    for k in (0, 3):
        with pytest.raises(ValueError):
            unfold(t, k)


@settings(max_examples=60, deadline=None)
@given(st.data())
def test_unfold_tensorize_roundtrip(data):
    d = data.draw(st.integers(2, 5))
    shape = tuple(data.draw(st.integers(1, 6)) for _ in range(d))
    k = data.draw(st.integers(1, d - 1))
    rng = np.random.default_rng(data.draw(st.integers(0, 2**31)))
    t = rng.standard_normal(shape)
    back = tensorize(unfold(t, k), shape, k)
    assert np.array_equal(back, t)          # bitwise round trip


def test_tensorize_zero_and_shape_check():
    z = tensorize(np.zeros((6, 4)), (2, 3, 4), 2)
    assert not z.any() and z.shape == (2, 3, 4)
    with pytest.raises(ValueError):
        tensorize(np.zeros((5, 4)), (2, 3, 4), 2)


def test_frobenius_matches_unfoldings():
    rng = np.random.default_rng(2)
    t = rng.standard_normal((3, 4, 2, 3))
    for k in (1, 2, 3):
        assert np.isclose(frobenius_norm(t), np.linalg.norm(unfold(t, k)))


def test_relative_error_basics():
    rng = np.random.default_rng(3)
    x = rng.standard_normal((4, 4, 4))
    assert relative_error(x, x) == 0.0
    assert np.isclose(relative_error(2 * x, x), 1.0)
    y = rng.standard_normal((4, 4, 4))
    manual = np.sqrt(np.sum((y - x) ** 2)) / np.sqrt(np.sum(x ** 2))
    assert np.isclose(relative_error(y, x), manual, rtol=1e-14)
    with pytest.raises(ValueError):
        relative_error(x, np.zeros_like(x))


@settings(max_examples=60, deadline=None)
@given(st.data())
def test_composite_index_roundtrip(data):
    d = data.draw(st.integers(1, 5))
    dims = tuple(data.draw(st.integers(1, 7)) for _ in range(d))
    total = int(np.prod(dims))
    c = data.draw(st.integers(0, total - 1))
    assert composite_index(split_index(c, dims), dims) == c

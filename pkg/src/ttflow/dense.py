"""Dense d-way tensors with colexicographic unfoldings.

A dense tensor is a plain ``numpy.ndarray``. The flat memory convention
throughout the package is colexicographic (first index fastest), i.e.
Fortran order, so that matricizations are zero-copy reshapes. A composite
row index for ``(i_1, ..., i_k)`` under shape ``(n_1, ..., n_k)`` is

    i_1 + n_1 * (i_2 + n_2 * (i_3 + ...)).

All scalars are float64.
"""

import numpy as np


def composite_index(idx, dims) -> int:
    """Colexicographic composite of a multi-index (first index fastest)."""
    c = 0
    for i, n in zip(reversed(idx), reversed(dims)):
        if not 0 <= i < n:
            raise ValueError(f"index {idx} out of range for dims {dims}")
        c = c * n + i
    return c


def split_index(c: int, dims) -> tuple:
    """Inverse of :func:`composite_index`."""
    total = 1
    for n in dims:
        total *= n
    if not 0 <= c < total:
        raise ValueError(f"composite index {c} out of range for dims {dims}")
    out = []
    for n in dims:
        out.append(c % n)
        c //= n
    return tuple(out)


def unfold(t: np.ndarray, k: int) -> np.ndarray:
    """k-th colexicographic unfolding: rows over modes 1..k, columns over k+1..d."""
    d = t.ndim
    if not 1 <= k <= d - 1:
        raise ValueError(f"unfolding position k={k} out of range for order-{d} tensor")
    rows = int(np.prod(t.shape[:k]))
    return t.reshape(rows, -1, order="F")


def tensorize(m: np.ndarray, shape, k: int) -> np.ndarray:
    """Inverse of :func:`unfold`; exact (bitwise) round trip."""
    shape = tuple(int(n) for n in shape)
    rows = int(np.prod(shape[:k]))
    cols = int(np.prod(shape[k:]))
    if m.shape != (rows, cols):
        raise ValueError(f"matrix shape {m.shape} does not match {(rows, cols)} for shape {shape}, k={k}")
    return np.asarray(m).reshape(shape, order="F")


def frobenius_norm(t: np.ndarray) -> float:
    return float(np.linalg.norm(np.asarray(t).ravel()))


def relative_error(y: np.ndarray, x: np.ndarray) -> float:
    """Relative Frobenius-norm error ||y - x||_F / ||x||_F."""
    x = np.asarray(x)
    y = np.asarray(y)
    if y.shape != x.shape:
        raise ValueError(f"shape mismatch: {y.shape} vs {x.shape}")
    nx = frobenius_norm(x)
    if nx == 0.0:
        raise ValueError("reference tensor has zero norm")
    return frobenius_norm(y - x) / nx

"""Dense tensor helpers: unfolding, folding, mode products and norms.

Tensors are plain ``numpy.ndarray`` objects in C order, so the flat layout is
last-index-fastest. Modes and slice indices are zero-based throughout.
"""

import numpy as np

__all__ = [
    "unfold",
    "fold",
    "mode_n_product",
    "outer_rank1",
    "hadamard",
    "inner",
    "norm",
    "slice3",
    "vec",
    "weighted_objective",
]


def _check_mode(ndim, n):
    if not 0 <= n < ndim:
        raise ValueError(f"mode {n} out of range for a tensor of order {ndim}")


def _check_same_shape(a, b):
    if a.shape != b.shape:
        raise ValueError(f"shape mismatch: {a.shape} vs {b.shape}")


def unfold(t, n):
    """Mode-n unfolding ``X_(n)`` of shape ``(I_n, prod_{m != n} I_m)``.

    Columns enumerate the remaining indices with the lowest remaining mode
    varying fastest.

    >>> unfold(np.arange(1, 9).reshape(2, 2, 2), 0)
    array([[1, 3, 2, 4],
           [5, 7, 6, 8]])
    """
    t = np.asarray(t)
    _check_mode(t.ndim, n)
    return np.reshape(np.moveaxis(t, n, 0), (t.shape[n], -1), order="F")


def fold(m, n, dims):
    """Inverse of :func:`unfold` for a tensor of shape ``dims``."""
    m = np.asarray(m)
    dims = tuple(int(d) for d in dims)
    _check_mode(len(dims), n)
    rest = dims[:n] + dims[n + 1:]
    expected = (dims[n], int(np.prod(rest, dtype=np.int64)))
    if m.shape != expected:
        raise ValueError(f"matrix of shape {m.shape} cannot fold to {dims} along mode {n}")
    full = np.reshape(m, (dims[n],) + rest, order="F")
    return np.ascontiguousarray(np.moveaxis(full, 0, n))


def mode_n_product(t, m, n):
    """Mode-n product ``t x_n m``; ``m`` has shape ``(J, I_n)``."""
    t = np.asarray(t)
    m = np.asarray(m)
    _check_mode(t.ndim, n)
    if m.ndim != 2 or m.shape[1] != t.shape[n]:
        raise ValueError(
            f"matrix of shape {m.shape} incompatible with mode {n} of size {t.shape[n]}"
        )
    out = np.tensordot(m, t, axes=(1, n))
    return np.ascontiguousarray(np.moveaxis(out, 0, n))


def outer_rank1(vectors):
    """Outer product ``u o v o ... o t`` of a list of vectors."""
    vectors = [np.asarray(v, dtype=float).ravel() for v in vectors]
    if not vectors:
        raise ValueError("outer_rank1 needs at least one vector")
    out = vectors[0]
    for v in vectors[1:]:
        out = np.multiply.outer(out, v)
    return out


def hadamard(a, b):
    a, b = np.asarray(a), np.asarray(b)
    _check_same_shape(a, b)
    return a * b


def inner(a, b):
    a, b = np.asarray(a), np.asarray(b)
    _check_same_shape(a, b)
    return float(np.dot(a.ravel(), b.ravel()))


def norm(t, kind="fro"):
    """Frobenius, l1 or l0 (count of nonzeros) norm of a tensor."""
    t = np.asarray(t)
    if kind == "fro":
        return float(np.sqrt(np.sum(np.square(t))))
    if kind == "l1":
        return float(np.sum(np.abs(t)))
    if kind == "l0":
        return float(np.count_nonzero(t))
    raise ValueError(f"unknown norm kind {kind!r}")


_SLICE_AXIS = {"frontal": 2, "lateral": 1, "horizontal": 0}


def slice3(t, orientation, index):
    """Frontal ``X[:, :, k]``, lateral ``X[:, j, :]`` or horizontal ``X[i, :, :]`` slice."""
    t = np.asarray(t)
    if t.ndim != 3:
        raise ValueError(f"slices are defined for 3-order tensors, got order {t.ndim}")
    try:
        axis = _SLICE_AXIS[orientation]
    except KeyError:
        raise ValueError(f"unknown slice orientation {orientation!r}") from None
    if not 0 <= index < t.shape[axis]:
        raise ValueError(f"slice index {index} out of range for size {t.shape[axis]}")
    return np.take(t, index, axis=axis)


def vec(m):
    """Column-stacking vectorization of a matrix."""
    return np.reshape(np.asarray(m), -1, order="F")


def weighted_objective(x, w, l):
    """Squared weighted residual ``||W * (X - L)||_F^2``."""
    x, w, l = np.asarray(x), np.asarray(w), np.asarray(l)
    _check_same_shape(x, w)
    _check_same_shape(x, l)
    r = w * (x - l)
    return float(np.dot(r.ravel(), r.ravel()))

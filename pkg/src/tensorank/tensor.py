"""Dense third-order tensors: vectorization, unfoldings and Khatri-Rao algebra.

A tensor is a float64 ndarray of shape ``(I, J, K)`` in C order, so the flat
buffer already runs with ``k`` fastest, then ``j``, then ``i``. That is the
canonical vectorization used throughout the package; ``vectorize`` is a view.

Unfoldings follow the Khatri-Rao convention

    A_(1) = X D (Z kr Y)^T,  A_(2) = Y D (Z kr X)^T,  A_(3) = Z D (Y kr X)^T

where ``kr`` is the column-wise Kronecker product defined by ``khatri_rao``.
"""
from __future__ import annotations

import numpy as np


class TensorError(ValueError):
    pass


def as_tensor3(data, dims=None) -> np.ndarray:
    """Validate ``data`` as a third-order tensor and return a read-only copy.

    ``data`` may be an ``(I, J, K)`` array or a flat buffer in vectorization
    order together with ``dims``.
    """
    arr = np.array(data, dtype=np.float64, copy=True)
    if dims is not None:
        dims = tuple(int(d) for d in dims)
        if len(dims) != 3 or min(dims) < 1:
            raise TensorError(f"dims must be three positive extents, got {dims}")
        if arr.size != dims[0] * dims[1] * dims[2]:
            raise TensorError(f"data length {arr.size} does not match dims {dims}")
        arr = arr.reshape(dims)
    if arr.ndim != 3 or min(arr.shape) < 1:
        raise TensorError(f"expected a nonempty third-order array, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise TensorError("tensor entries must be finite")
    arr.flags.writeable = False
    return arr


def as_matrix(data) -> np.ndarray:
    arr = np.array(data, dtype=np.float64, copy=True)
    if arr.ndim != 2 or min(arr.shape) < 1:
        raise TensorError(f"expected a nonempty matrix, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise TensorError("matrix entries must be finite")
    arr.flags.writeable = False
    return arr


def vectorize(t: np.ndarray) -> np.ndarray:
    """Flat view of ``t`` with ``k`` varying fastest, then ``j``, then ``i``."""
    return np.ascontiguousarray(t).reshape(-1)


def devectorize(a: np.ndarray, dims) -> np.ndarray:
    return as_tensor3(a, dims)


def matricize(t: np.ndarray, mode: int) -> np.ndarray:
    """Mode-``mode`` unfolding (``mode`` in 1, 2, 3).

    Column ordering is the one that makes the Khatri-Rao identities in the
    module docstring hold exactly.
    """
    I, J, K = t.shape
    if mode == 1:
        # column index k*J + j
        return t.transpose(0, 2, 1).reshape(I, K * J)
    if mode == 2:
        # column index k*I + i
        return t.transpose(1, 2, 0).reshape(J, K * I)
    if mode == 3:
        # column index j*I + i
        return t.transpose(2, 1, 0).reshape(K, J * I)
    raise TensorError(f"mode must be 1, 2 or 3, got {mode!r}")


def kronecker(x: np.ndarray, y: np.ndarray) -> np.ndarray:
    """``out[i*n + j] = x[i] * y[j]`` for vectors of length m and n."""
    x = np.asarray(x, dtype=np.float64).reshape(-1)
    y = np.asarray(y, dtype=np.float64).reshape(-1)
    if x.size == 0 or y.size == 0:
        raise TensorError("kronecker needs nonempty vectors")
    return np.outer(x, y).reshape(-1)


def khatri_rao(X: np.ndarray, Y: np.ndarray) -> np.ndarray:
    """Column-wise Kronecker product: column r is ``kronecker(X[:, r], Y[:, r])``."""
    X = np.asarray(X, dtype=np.float64)
    Y = np.asarray(Y, dtype=np.float64)
    if X.ndim != 2 or Y.ndim != 2 or X.shape[1] != Y.shape[1]:
        raise TensorError(
            f"khatri_rao needs matrices with equal column counts, got {X.shape} and {Y.shape}"
        )
    return (X[:, None, :] * Y[None, :, :]).reshape(X.shape[0] * Y.shape[0], X.shape[1])


def outer3(x, y, z) -> np.ndarray:
    """Rank-one tensor ``x o y o z``."""
    return np.einsum("i,j,k->ijk", x, y, z)

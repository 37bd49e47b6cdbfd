"""Dense tensor arithmetic: the numeric substrate for every other module.

Tensors are plain float64 numpy arrays in row-major order.  Everything here
is a pure function; nothing mutates its inputs.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DomainError, NumericError, RangeError, ShapeError

__all__ = [
    "as_tensor",
    "matricize",
    "unmatricize",
    "contract",
    "tensor_product",
    "SvdResult",
    "svd",
    "p_norm",
    "schatten_p_norm",
]


def as_tensor(x) -> np.ndarray:
    """Coerce to a C-ordered float64 array (rank 0 permitted)."""
    arr = np.asarray(x, dtype=np.float64)
    return arr if arr.ndim == 0 else np.ascontiguousarray(arr)


def matricize(t: np.ndarray, cut: int) -> np.ndarray:
    """Regroup the first `cut` indices against the rest.

    Returns a matrix of shape (prod(shape[:cut]), prod(shape[cut:])).  Pure
    index regrouping: the flat data order is unchanged.
    """
    t = as_tensor(t)
    if t.ndim < 2:
        raise ShapeError(f"matricize requires rank >= 2, got rank {t.ndim}")
    if not 1 <= cut < t.ndim:
        raise RangeError(f"cut must satisfy 1 <= cut < {t.ndim}, got {cut}")
    rows = int(np.prod(t.shape[:cut]))
    return t.reshape(rows, -1)


def unmatricize(m: np.ndarray, shape) -> np.ndarray:
    """Inverse of matricize for the given original shape."""
    m = as_tensor(m)
    shape = tuple(int(s) for s in shape)
    if m.size != int(np.prod(shape)):
        raise ShapeError(f"cannot reshape {m.size} elements into {shape}")
    return m.reshape(shape)


def contract(a: np.ndarray, axes_a, b: np.ndarray, axes_b) -> np.ndarray:
    """Sum-of-products contraction over paired axes.

    Surviving axes are ordered a-then-b (tensordot convention).
    """
    a, b = as_tensor(a), as_tensor(b)
    axes_a = [int(i) for i in axes_a]
    axes_b = [int(i) for i in axes_b]
    if len(axes_a) != len(axes_b):
        raise ShapeError("axis lists must have equal length")
    if len(set(axes_a)) != len(axes_a) or len(set(axes_b)) != len(axes_b):
        raise ShapeError("axis lists must be duplicate-free")
    for ia, ib in zip(axes_a, axes_b):
        if not (-a.ndim <= ia < a.ndim and -b.ndim <= ib < b.ndim):
            raise RangeError(f"contraction axes ({ia},{ib}) out of range")
        if a.shape[ia] != b.shape[ib]:
            raise ShapeError(
                f"paired extents differ: a.shape[{ia}]={a.shape[ia]} "
                f"vs b.shape[{ib}]={b.shape[ib]}"
            )
    return np.tensordot(a, b, axes=(axes_a, axes_b))


def tensor_product(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Outer product: shape is concat(shape(a), shape(b))."""
    a, b = as_tensor(a), as_tensor(b)
    return np.multiply.outer(a, b)


@dataclass(frozen=True)
class SvdResult:
    u: np.ndarray
    singular_values: np.ndarray
    vt: np.ndarray

    def reconstruct(self) -> np.ndarray:
        return (self.u * self.singular_values) @ self.vt


def svd(m: np.ndarray) -> SvdResult:
    """Thin SVD with a fixed sign convention.

    The first nonzero entry of each left singular vector is made
    non-negative so repeated runs are bit-for-bit reproducible.
    """
    m = as_tensor(m)
    if m.ndim != 2:
        raise ShapeError(f"svd requires a matrix, got rank {m.ndim}")
    if not np.all(np.isfinite(m)):
        raise NumericError("svd input contains non-finite entries")
    u, s, vt = np.linalg.svd(m, full_matrices=False)
    for j in range(u.shape[1]):
        col = u[:, j]
        nz = np.nonzero(col)[0]
        if nz.size and col[nz[0]] < 0:
            u[:, j] = -col
            vt[j, :] = -vt[j, :]
    return SvdResult(u=u, singular_values=s, vt=vt)


def p_norm(t: np.ndarray, p: float) -> float:
    """Elementwise p-norm (sum |x|^p)^(1/p)."""
    if p < 1:
        raise DomainError(f"p-norm requires p >= 1, got {p}")
    t = as_tensor(t)
    return float(np.sum(np.abs(t) ** p) ** (1.0 / p))


def schatten_p_norm(m: np.ndarray, p: float) -> float:
    """Schatten p-norm: p-norm of the singular value vector."""
    if p < 1:
        raise DomainError(f"Schatten norm requires p >= 1, got {p}")
    s = svd(m).singular_values
    return float(np.sum(s ** p) ** (1.0 / p))

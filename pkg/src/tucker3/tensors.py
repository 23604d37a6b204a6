"""Dense order-3 tensor type and multilinear algebra primitives.

Unfolding convention
--------------------
All mode-n unfoldings use the Kolda-Bader column ordering: the remaining
modes vary with the lower-numbered mode fastest.  Under this convention a
Tucker product ``core x1 U1 x2 U2 x3 U3`` unfolds along mode 1 as
``U1 @ unfold(core, 1) @ kron(U3, U2).T`` (standard Kronecker product).

Tensors are stored row-major as 64-bit floats.  Values are immutable after
construction; every operation returns a fresh tensor.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = [
    "DenseTensor3",
    "tensor3",
    "zeros",
    "unfold",
    "fold",
    "mode_n_product",
    "khatri_rao",
    "kron_cofactor",
    "frobenius_norm",
    "l1_norm",
    "max_abs",
]

# Trailing-axis order that makes a C-order reshape of the transposed array
# equal to the Kolda-Bader unfolding (lower-numbered remaining mode fastest).
_UNFOLD_AXES = {1: (0, 2, 1), 2: (1, 2, 0), 3: (2, 1, 0)}


@dataclass(frozen=True)
class DenseTensor3:
    """Dense order-3 real tensor with immutable row-major float64 storage."""

    data: np.ndarray

    def __post_init__(self):
        arr = self.data
        if arr.ndim != 3:
            raise ValueError(f"expected an order-3 array, got ndim={arr.ndim}")
        if min(arr.shape) < 1:
            raise ValueError(f"all extents must be positive, got {arr.shape}")
        if not np.isfinite(arr).all():
            raise ValueError("tensor entries must be finite (no NaN/Inf)")
        arr.setflags(write=False)

    @property
    def dims(self) -> tuple[int, int, int]:
        return self.data.shape

    @property
    def size(self) -> int:
        return self.data.size

    def __eq__(self, other) -> bool:
        if not isinstance(other, DenseTensor3):
            return NotImplemented
        return self.dims == other.dims and np.array_equal(self.data, other.data)


def tensor3(array_like) -> DenseTensor3:
    """Build a DenseTensor3 from any order-3 array-like (always copies)."""
    arr = np.array(array_like, dtype=np.float64, order="C", copy=True)
    return DenseTensor3(arr)


def zeros(dims) -> DenseTensor3:
    return DenseTensor3(np.zeros(tuple(dims), dtype=np.float64))


def _check_mode(mode: int) -> None:
    if mode not in (1, 2, 3):
        raise ValueError(f"mode must be 1, 2 or 3, got {mode}")


def unfold(t: DenseTensor3, mode: int) -> np.ndarray:
    """Mode-n matricization of `t` with I_n rows (Kolda-Bader ordering)."""
    _check_mode(mode)
    axes = _UNFOLD_AXES[mode]
    rows = t.dims[mode - 1]
    return np.ascontiguousarray(t.data.transpose(axes)).reshape(rows, -1)


def fold(m: np.ndarray, mode: int, dims) -> DenseTensor3:
    """Exact inverse of :func:`unfold` under the same column ordering."""
    _check_mode(mode)
    dims = tuple(int(d) for d in dims)
    if len(dims) != 3:
        raise ValueError(f"dims must have length 3, got {dims}")
    m = np.asarray(m, dtype=np.float64)
    rows = dims[mode - 1]
    cols = int(np.prod(dims)) // rows
    if m.shape != (rows, cols):
        raise ValueError(f"matrix shape {m.shape} does not match mode-{mode} "
                         f"unfolding of dims {dims}")
    axes = _UNFOLD_AXES[mode]
    shuffled = tuple(dims[a] for a in axes)
    # invert the transpose applied by unfold
    inverse = tuple(int(i) for i in np.argsort(axes))
    return DenseTensor3(np.ascontiguousarray(m.reshape(shuffled).transpose(inverse)))


def mode_n_product(t: DenseTensor3, u: np.ndarray, mode: int) -> DenseTensor3:
    """Multiply `t` by the matrix `u` along `mode` (extent becomes u.shape[0])."""
    _check_mode(mode)
    u = np.asarray(u, dtype=np.float64)
    if u.ndim != 2:
        raise ValueError(f"expected a matrix, got ndim={u.ndim}")
    if u.shape[1] != t.dims[mode - 1]:
        raise ValueError(f"mode-{mode} product needs u.cols == {t.dims[mode - 1]}, "
                         f"got {u.shape[1]}")
    new_dims = list(t.dims)
    new_dims[mode - 1] = u.shape[0]
    return fold(u @ unfold(t, mode), mode, new_dims)


def khatri_rao(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Column-wise Kronecker product: (a.rows * b.rows) x a.cols."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.ndim != 2 or b.ndim != 2:
        raise ValueError("khatri_rao expects two matrices")
    if a.shape[1] != b.shape[1]:
        raise ValueError(f"column mismatch: {a.shape[1]} vs {b.shape[1]}")
    return np.einsum("ik,jk->ijk", a, b).reshape(-1, a.shape[1])


def kron_cofactor(factors, mode: int) -> np.ndarray:
    """Kronecker product of the two factors complementary to `mode`.

    Returns the matrix W such that a Tucker product unfolds along `mode`
    as ``U_n @ unfold(core, n) @ W.T``: higher-numbered factor first, so
    the column ordering matches the unfolding convention.
    """
    _check_mode(mode)
    u1, u2, u3 = factors
    if mode == 1:
        return np.kron(u3, u2)
    if mode == 2:
        return np.kron(u3, u1)
    return np.kron(u2, u1)


def frobenius_norm(t: DenseTensor3) -> float:
    return float(np.linalg.norm(t.data.ravel()))


def l1_norm(t: DenseTensor3) -> float:
    return float(np.abs(t.data).sum())


def max_abs(t: DenseTensor3) -> float:
    return float(np.abs(t.data).max())

"""Dense order-d tensor basics: layout, unfolding, mode products, slicing.

A tensor here is a plain :class:`numpy.ndarray` of ``float64`` or
``complex128`` with ``ndim >= 3``.  The canonical flat layout is
column-major (Fortran order, first index fastest); every reshape in this
package uses ``order='F'`` so that linear indices, unfolding columns and
the slice enumeration below all agree with that single convention.

Mode-1/mode-2 slices ``X[:, :, i3, ..., id]`` are enumerated by the linear
index ``j = i3 + I3*(i4 + I4*(...))`` (0-based; the first trailing index
varies fastest).
"""

from __future__ import annotations

import math

import numpy as np

__all__ = [
    "as_tensor",
    "num_slices",
    "unfold",
    "fold",
    "mode_product",
    "frobenius_norm",
    "slice_to_linear",
    "linear_to_slice",
    "get_slice",
    "set_slice",
    "to_slice_stack",
    "from_slice_stack",
    "bdiag",
]


def as_tensor(x, min_order: int = 3) -> np.ndarray:
    """Validate *x* as a dense tensor and return it as float64/complex128.

    Inputs of order below *min_order* are rejected rather than padded;
    callers that want padding (e.g. the CLI) must do it explicitly.
    """
    arr = np.asarray(x)
    if arr.ndim < min_order:
        raise ValueError(
            f"tensor must have order >= {min_order}, got order {arr.ndim}"
        )
    if np.iscomplexobj(arr):
        return np.asarray(arr, dtype=np.complex128)
    return np.asarray(arr, dtype=np.float64)


def num_slices(shape) -> int:
    """Number of mode-1/mode-2 slices, J = I3 * ... * Id."""
    return int(math.prod(shape[2:]))


def unfold(x: np.ndarray, mode: int) -> np.ndarray:
    """Mode-*mode* unfolding (0-based mode index).

    Row i of the result is the slice of *x* with index i along *mode*;
    columns enumerate the remaining indices in column-major order
    (earlier modes vary fastest).  ``fold(unfold(x, m), m, x.shape)``
    recovers *x* exactly.
    """
    if not 0 <= mode < x.ndim:
        raise ValueError(f"mode {mode} out of range for order-{x.ndim} tensor")
    return np.moveaxis(x, mode, 0).reshape((x.shape[mode], -1), order="F")


def fold(mat: np.ndarray, mode: int, shape) -> np.ndarray:
    """Inverse of :func:`unfold` for a tensor of the given *shape*."""
    shape = tuple(shape)
    if not 0 <= mode < len(shape):
        raise ValueError(f"mode {mode} out of range for order-{len(shape)} tensor")
    rest = shape[:mode] + shape[mode + 1:]
    expected = (mat.shape[0] if mat.ndim else 0, math.prod(rest))
    if mat.shape != (shape[mode], expected[1]):
        raise ValueError(f"matrix shape {mat.shape} does not fold into {shape}")
    return np.moveaxis(mat.reshape((shape[mode],) + rest, order="F"), 0, mode)


def mode_product(x: np.ndarray, u: np.ndarray, mode: int) -> np.ndarray:
    """Mode-*mode* product: fold(u @ unfold(x, mode)). *u* is (m, I_mode)."""
    u = np.asarray(u)
    if u.ndim != 2 or u.shape[1] != x.shape[mode]:
        raise ValueError(
            f"matrix of shape {u.shape} cannot multiply mode {mode} "
            f"of size {x.shape[mode]}"
        )
    new_shape = x.shape[:mode] + (u.shape[0],) + x.shape[mode + 1:]
    return fold(u @ unfold(x, mode), mode, new_shape)


def frobenius_norm(x: np.ndarray) -> float:
    """sqrt of the sum of squared entry magnitudes."""
    return float(np.linalg.norm(np.ravel(x)))


def slice_to_linear(index, shape) -> int:
    """Linear slice index j for a trailing multi-index (i3, ..., id), 0-based."""
    trailing = shape[2:]
    index = tuple(index)
    if len(index) != len(trailing):
        raise ValueError(f"slice index {index} does not match trailing shape {trailing}")
    j = 0
    for i, n in zip(reversed(index), reversed(trailing)):
        if not 0 <= i < n:
            raise IndexError(f"slice index {index} out of range for {trailing}")
        j = j * n + i
    return j


def linear_to_slice(j: int, shape) -> tuple:
    """Trailing multi-index (i3, ..., id) for a linear slice index, 0-based."""
    trailing = shape[2:]
    total = num_slices(shape)
    if not 0 <= j < total:
        raise IndexError(f"linear slice index {j} out of range [0, {total})")
    out = []
    for n in trailing:
        out.append(j % n)
        j //= n
    return tuple(out)


def get_slice(x: np.ndarray, index) -> np.ndarray:
    """The mode-1/mode-2 slice X[:, :, i3, ..., id] by tuple or linear index."""
    if np.isscalar(index):
        index = linear_to_slice(int(index), x.shape)
    else:
        index = tuple(int(i) for i in index)
        linear_to_slice(slice_to_linear(index, x.shape), x.shape)  # range check
    return x[(slice(None), slice(None)) + index]


def set_slice(x: np.ndarray, index, value) -> None:
    """In-place setter matching :func:`get_slice`."""
    if np.isscalar(index):
        index = linear_to_slice(int(index), x.shape)
    else:
        index = tuple(int(i) for i in index)
        linear_to_slice(slice_to_linear(index, x.shape), x.shape)
    x[(slice(None), slice(None)) + index] = value


def to_slice_stack(x: np.ndarray) -> np.ndarray:
    """Reshape to (I1, I2, J) with slices ordered by their linear index."""
    return x.reshape((x.shape[0], x.shape[1], -1), order="F")


def from_slice_stack(stack: np.ndarray, shape) -> np.ndarray:
    """Inverse of :func:`to_slice_stack`."""
    return stack.reshape(tuple(shape), order="F")


def bdiag(x: np.ndarray) -> np.ndarray:
    """Block-diagonal matrix diag(X^0, ..., X^{J-1}) of the slices.

    Intended as a small-problem oracle, not a computational kernel.
    """
    i1, i2 = x.shape[:2]
    stack = to_slice_stack(x)
    j = stack.shape[2]
    out = np.zeros((i1 * j, i2 * j), dtype=stack.dtype)
    for k in range(j):
        out[k * i1:(k + 1) * i1, k * i2:(k + 1) * i2] = stack[:, :, k]
    return out

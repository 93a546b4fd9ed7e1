"""In-place fast Walsh-Hadamard transform.

The kernel multiplies by the unnormalized Sylvester-Hadamard matrix
H_{2n} = [[H_n, H_n], [H_n, -H_n]], H_1 = [1], so all entries are +-1 and
H.H = n.I.  No 1/sqrt(n) factor is applied here; callers own normalization.

The butterfly is iterative radix-2 and updates the buffer in place:

    a, b  <-  a + b, a - b      (pairs at stride h, h = 1, 2, 4, ...)

realized as ``a += b; b *= -2; b += a`` so no scratch array is allocated.
"""

from __future__ import annotations

import numpy as np

from .errors import InvalidDimensionError

_FLOAT_DTYPES = (np.float32, np.float64)


def is_power_of_two(n: int) -> bool:
    return n >= 1 and (n & (n - 1)) == 0


def _check_buffer(v: np.ndarray, ndim: int) -> None:
    if not isinstance(v, np.ndarray) or v.ndim != ndim:
        raise InvalidDimensionError(f"expected a {ndim}-d numpy array, got {type(v).__name__}")
    if v.dtype.type not in _FLOAT_DTYPES:
        raise InvalidDimensionError(f"buffer dtype must be float32 or float64, got {v.dtype}")
    if not v.flags.c_contiguous:
        raise InvalidDimensionError("in-place transform requires a C-contiguous buffer")
    n = v.shape[-1]
    if not is_power_of_two(n):
        raise InvalidDimensionError(f"transform length must be a power of two, got {n}")


def fwht_rows_inplace(mat: np.ndarray) -> None:
    """Transform every row of a 2-d buffer in place.

    Works in the buffer's own precision (float32 or float64).
    """
    _check_buffer(mat, 2)
    n = mat.shape[1]
    h = 1
    while h < n:
        x = mat.reshape(mat.shape[0], -1, 2, h)
        a = x[:, :, 0, :]
        b = x[:, :, 1, :]
        a += b
        b *= -2.0
        b += a
        h *= 2


def fwht_inplace(v: np.ndarray) -> None:
    """Replace a length-n vector v by H.v, n a power of two.

    O(n log n) operations, O(1) auxiliary space; n = 1 is the identity.
    """
    _check_buffer(v, 1)
    fwht_rows_inplace(v.reshape(1, -1))


def sylvester_hadamard(n: int) -> np.ndarray:
    """Explicit n x n Sylvester-Hadamard matrix (entries +-1, float64)."""
    if not is_power_of_two(n):
        raise InvalidDimensionError(f"Hadamard order must be a power of two, got {n}")
    h = np.array([[1.0]])
    while h.shape[0] < n:
        h = np.block([[h, h], [h, -h]])
    return h


def naive_hadamard_multiply(v: np.ndarray) -> np.ndarray:
    """O(n^2) oracle: H.v by explicit matrix construction."""
    v = np.asarray(v, dtype=np.float64)
    if v.ndim != 1:
        raise InvalidDimensionError("expected a 1-d vector")
    return sylvester_hadamard(v.shape[0]) @ v

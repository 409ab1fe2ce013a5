"""Packed storage for large dense symmetric matrices.

Only the upper triangle (diagonal included) is kept, in the BLAS packed
layout: entry (i, j) with i <= j lives at ``buf[i + j * (j + 1) // 2]``.
Each matrix column is therefore a contiguous slice, and matrix-vector
products go through the BLAS ``dspmv`` routine.  Halving the footprint
matters once graphs reach 10^4 vertices (a full float64 square would be
~800 MB at that size).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg.blas import dspmv


def packed_length(size: int) -> int:
    """Number of stored entries for a ``size`` x ``size`` symmetric matrix."""
    return size * (size + 1) // 2


def column_bounds(j: int) -> tuple[int, int]:
    """Buffer slice [start, stop) holding column j rows 0..j."""
    start = j * (j + 1) // 2
    return start, start + j + 1


@dataclass(frozen=True)
class PackedSymmetricMatrix:
    """Symmetric float64 matrix in packed upper-triangular storage."""

    size: int
    buf: np.ndarray

    def __post_init__(self):
        if self.size < 1:
            raise ValueError("size must be positive")
        buf = np.ascontiguousarray(self.buf, dtype=np.float64)
        if buf.shape != (packed_length(self.size),):
            raise ValueError(
                f"packed buffer has {self.buf.shape} entries, "
                f"expected ({packed_length(self.size)},) for size {self.size}"
            )
        object.__setattr__(self, "buf", buf)

    @classmethod
    def zeros(cls, size: int) -> "PackedSymmetricMatrix":
        return cls(size, np.zeros(packed_length(size)))

    @classmethod
    def from_dense(cls, dense: np.ndarray) -> "PackedSymmetricMatrix":
        """Pack the upper triangle of a square array (symmetry assumed)."""
        dense = np.asarray(dense, dtype=np.float64)
        if dense.ndim != 2 or dense.shape[0] != dense.shape[1]:
            raise ValueError("expected a square 2-D array")
        size = dense.shape[0]
        buf = np.empty(packed_length(size))
        for j in range(size):
            lo, hi = column_bounds(j)
            buf[lo:hi] = dense[: j + 1, j]
        return cls(size, buf)

    def to_dense(self) -> np.ndarray:
        """Materialize the full square matrix (intended for small sizes)."""
        out = np.empty((self.size, self.size))
        for j in range(self.size):
            lo, hi = column_bounds(j)
            out[: j + 1, j] = self.buf[lo:hi]
            out[j, : j + 1] = self.buf[lo:hi]
        return out

    def matvec(self, x: np.ndarray) -> np.ndarray:
        x = np.ascontiguousarray(x, dtype=np.float64)
        if x.shape != (self.size,):
            raise ValueError(f"vector has shape {x.shape}, expected ({self.size},)")
        return dspmv(self.size, 1.0, self.buf, x)

    def row_sums(self) -> np.ndarray:
        return self.matvec(np.ones(self.size))

    def diagonal(self) -> np.ndarray:
        idx = np.arange(self.size, dtype=np.int64)
        return self.buf[idx + idx * (idx + 1) // 2]

    def element(self, i: int, j: int) -> float:
        if not (0 <= i < self.size and 0 <= j < self.size):
            raise IndexError(f"({i}, {j}) out of range for size {self.size}")
        if i > j:
            i, j = j, i
        return float(self.buf[i + j * (j + 1) // 2])

    def column_slice(self, j: int) -> np.ndarray:
        """View of column j rows 0..j (shared memory, caller may mutate)."""
        lo, hi = column_bounds(j)
        return self.buf[lo:hi]

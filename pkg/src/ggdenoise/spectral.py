"""Spectral machinery: Gramian construction, top-L eigenpairs, projection.

The geodesic distance matrix is double-centered into a Gramian whose
leading eigenvectors carry the prominent image structure.  Eigenpairs
come from a thick-restart Lanczos iteration with full reorthogonalization
(a dense direct solver doubles as the small-size oracle).  Denoising
projects each patch-coordinate slot, viewed as a vector over all patches,
onto the retained eigenvector span.
"""

from __future__ import annotations

import logging
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import scipy.sparse as sp

from .errors import ConvergenceError
from .graph import GeodesicDistances
from .packed import PackedSymmetricMatrix, packed_length
from .patch import PatchSet

log = logging.getLogger(__name__)

_BASIS_MAGIC = b"GGB1"

# Fixed start seed keeps the iterative solver deterministic run to run.
_LANCZOS_SEED = 0x5EED5

# Dense direct decomposition below this size; doubles as the test oracle.
DENSE_CUTOFF = 2000

SOURCE_GRAMIAN = "gramian"
SOURCE_LAPLACIAN = "laplacian"


@dataclass(frozen=True)
class GramianMatrix:
    """Double-centered geodesic distance matrix, packed symmetric storage."""

    matrix: PackedSymmetricMatrix

    @property
    def size(self) -> int:
        return self.matrix.size

    def to_dense(self) -> np.ndarray:
        return self.matrix.to_dense()

    def row_sums(self) -> np.ndarray:
        return self.matrix.row_sums()


@dataclass(frozen=True)
class SpectralBasis:
    """L orthonormal eigenvectors (rows) with their eigenvalues.

    ``values`` follow the selection rule's order: descending for the
    Gramian (largest first), ascending for the Laplacian (smallest first).
    """

    source: str
    values: np.ndarray
    vectors: np.ndarray  # (count, size)

    def __post_init__(self):
        values = np.asarray(self.values, dtype=np.float64)
        vectors = np.ascontiguousarray(self.vectors, dtype=np.float64)
        if vectors.ndim != 2 or values.shape != (vectors.shape[0],):
            raise ValueError("eigenvalue/eigenvector shapes are inconsistent")
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "vectors", vectors)

    @property
    def count(self) -> int:
        return self.vectors.shape[0]

    @property
    def size(self) -> int:
        return self.vectors.shape[1]

    def take(self, count: int) -> "SpectralBasis":
        """Leading ``count`` pairs (bases are nested in selection order)."""
        if not (1 <= count <= self.count):
            raise ValueError(f"count must be in [1, {self.count}], got {count}")
        return SpectralBasis(
            source=self.source,
            values=self.values[:count],
            vectors=self.vectors[:count],
        )

    def dump(self, path) -> None:
        """Binary checkpoint: ``GGB1``, u64-LE count and size, f64-LE
        eigenvalues, then eigenvectors row by row."""
        path = Path(path)
        with path.open("wb") as fh:
            fh.write(_BASIS_MAGIC)
            fh.write(struct.pack("<QQ", self.count, self.size))
            fh.write(self.values.astype("<f8", copy=False).tobytes())
            fh.write(self.vectors.astype("<f8", copy=False).tobytes())

    @classmethod
    def load(cls, path, source: str = SOURCE_GRAMIAN) -> "SpectralBasis":
        path = Path(path)
        raw = path.read_bytes()
        if raw[:4] != _BASIS_MAGIC:
            raise ValueError(f"{path}: not a spectral basis dump")
        count, size = struct.unpack("<QQ", raw[4:20])
        need = 20 + 8 * count * (1 + size)
        if len(raw) < need:
            raise ValueError(f"{path}: truncated basis dump")
        values = np.frombuffer(raw[20 : 20 + 8 * count], dtype="<f8")
        vectors = np.frombuffer(raw[20 + 8 * count : need], dtype="<f8")
        return cls(
            source=source,
            values=values.astype(np.float64),
            vectors=vectors.astype(np.float64).reshape(count, size),
        )


def gramian_from_distances(distances: GeodesicDistances) -> GramianMatrix:
    """Double centering: g_ij = -0.5 (d_ij - rowmean_i - colmean_j + grandmean).

    Row sums of the result vanish, so the constant vector always lies in
    the kernel.
    """
    buf = distances.matrix.buf
    if not np.all(np.isfinite(buf)):
        raise ValueError("distance matrix has non-finite entries")
    m = distances.size
    row_means = distances.matrix.row_sums() / m
    grand_mean = float(row_means.mean())
    out = np.empty_like(buf)
    for j in range(m):
        lo = j * (j + 1) // 2
        hi = lo + j + 1
        out[lo:hi] = -0.5 * (buf[lo:hi] - row_means[: j + 1] - row_means[j] + grand_mean)
    return GramianMatrix(PackedSymmetricMatrix(m, out))


def _as_operator(matrix):
    """(matvec, size, default_source) for the accepted matrix kinds."""
    if isinstance(matrix, GramianMatrix):
        return matrix.matrix.matvec, matrix.size, SOURCE_GRAMIAN
    if isinstance(matrix, PackedSymmetricMatrix):
        return matrix.matvec, matrix.size, SOURCE_GRAMIAN
    if sp.issparse(matrix):
        csr = matrix.tocsr()
        return (lambda x: csr @ x), csr.shape[0], SOURCE_LAPLACIAN
    arr = np.asarray(matrix, dtype=np.float64)
    if arr.ndim != 2 or arr.shape[0] != arr.shape[1]:
        raise ValueError("expected a square symmetric matrix")
    return (lambda x: arr @ x), arr.shape[0], SOURCE_GRAMIAN


def _to_dense(matrix) -> np.ndarray:
    if isinstance(matrix, GramianMatrix):
        return matrix.to_dense()
    if isinstance(matrix, PackedSymmetricMatrix):
        return matrix.to_dense()
    if sp.issparse(matrix):
        return matrix.toarray()
    return np.asarray(matrix, dtype=np.float64)


def top_eigenpairs(
    matrix,
    count: int,
    rule: str = "largest",
    driver: str = "auto",
    source: str | None = None,
) -> SpectralBasis:
    """Leading eigenpairs of a symmetric matrix under a selection rule.

    ``matrix`` may be a :class:`GramianMatrix`, a packed symmetric matrix,
    a scipy sparse matrix, or a dense array.  ``rule`` picks the
    algebraically largest or smallest end.  ``driver`` is "lanczos",
    "dense", or "auto" (dense for small matrices or near-full spectra).
    Eigenvectors are orthonormal, sign-fixed so each one's largest-
    magnitude entry is positive, and deterministic for a fixed built-in
    start seed.
    """
    matvec, size, inferred = _as_operator(matrix)
    if source is None:
        source = inferred
    if not (1 <= count <= size):
        raise ValueError(f"count must be in [1, {size}], got {count}")
    if rule not in ("largest", "smallest"):
        raise ValueError(f"unknown selection rule {rule!r}")
    if driver == "auto":
        driver = "dense" if (size <= DENSE_CUTOFF or count > size // 3) else "lanczos"

    if driver == "dense":
        dense = _to_dense(matrix)
        eigvals, eigvecs = np.linalg.eigh(dense)  # ascending
        if rule == "largest":
            log.debug("most negative eigenvalue: %.6g", eigvals[0])
            sel = np.argsort(eigvals)[::-1][:count]
        else:
            sel = np.argsort(eigvals)[:count]
        values = eigvals[sel]
        vectors = eigvecs[:, sel].T.copy()
    elif driver == "lanczos":
        sign = 1.0 if rule == "largest" else -1.0
        op = matvec if rule == "largest" else (lambda x: -matvec(x))
        values, vectors = _thick_restart_lanczos(
            op,
            size,
            count,
            max_steps=30 * count + 300,
            tol=1e-8,
        )
        values = sign * values
    else:
        raise ValueError(f"unknown eigensolver driver {driver!r}")

    vectors = _fix_signs(vectors)
    return SpectralBasis(source=source, values=values, vectors=vectors)


def _fix_signs(vectors: np.ndarray) -> np.ndarray:
    for row in vectors:
        peak = np.argmax(np.abs(row))
        if row[peak] < 0:
            row *= -1.0
    return vectors


def _thick_restart_lanczos(
    matvec,
    size: int,
    want: int,
    max_steps: int,
    tol: float,
    seed: int = _LANCZOS_SEED,
):
    """Thick-restart Lanczos with full reorthogonalization.

    Returns the ``want`` algebraically largest eigenpairs.  The Krylov
    basis is reorthogonalized twice against every retained vector each
    step, so the projected matrix can be treated as exact; restarts keep
    the best Ritz pairs plus the running residual vector.  ``max_steps``
    caps matrix-vector products; hitting it raises
    :class:`ConvergenceError` with the residual actually reached.
    """
    rng = np.random.default_rng(seed)
    max_dim = min(size, max(2 * want + 16, 48))
    basis = np.empty((max_dim, size))
    projected = np.zeros((max_dim, max_dim))

    vec = rng.standard_normal(size)
    basis[0] = vec / np.linalg.norm(vec)
    dim = 1
    steps = 0

    while True:
        # Expand the subspace up to max_dim (or the step cap).
        while True:
            j = dim - 1
            w = matvec(basis[j])
            steps += 1
            coeffs = basis[:dim] @ w
            w -= coeffs @ basis[:dim]
            extra = basis[:dim] @ w
            w -= extra @ basis[:dim]
            coeffs += extra
            projected[:dim, j] = coeffs
            projected[j, :dim] = coeffs
            beta = float(np.linalg.norm(w))
            if dim == max_dim or steps >= max_steps:
                break
            scale = max(np.abs(np.diag(projected[:dim, :dim])).max(), 1.0)
            if beta <= 1e-13 * scale:
                # Invariant subspace: continue from a fresh random direction.
                w = rng.standard_normal(size)
                w -= (basis[:dim] @ w) @ basis[:dim]
                w -= (basis[:dim] @ w) @ basis[:dim]
                fresh_norm = float(np.linalg.norm(w))
                if fresh_norm <= 1e-13:
                    break
                basis[dim] = w / fresh_norm
                projected[dim, j] = 0.0
                projected[j, dim] = 0.0
                beta = 0.0
                dim += 1
                continue
            basis[dim] = w / beta
            projected[dim, j] = beta
            projected[j, dim] = beta
            dim += 1

        theta, ritz = np.linalg.eigh(projected[:dim, :dim])
        order = np.argsort(theta)[::-1]
        resid = beta * np.abs(ritz[dim - 1, :])
        top = order[:want]
        scale = max(float(np.abs(theta).max()), np.finfo(np.float64).tiny)
        worst = float(resid[top].max()) / scale
        if worst <= tol or dim == size:
            values = theta[top]
            vectors = ritz[:, top].T @ basis[:dim]
            return values, vectors
        if steps >= max_steps:
            raise ConvergenceError(
                f"eigensolver did not reach tolerance {tol:g} within "
                f"{max_steps} matrix-vector products "
                f"(achieved relative residual {worst:.3g})",
                achieved_residual=worst,
            )

        # Thick restart: keep the best Ritz vectors plus the residual.
        keep = min(want + 8, dim - 2)
        if keep < 1:
            keep = 1
        sel = order[:keep]
        kept = ritz[:, sel].T @ basis[:dim]
        basis[:keep] = kept
        basis[keep] = w / beta
        projected[:, :] = 0.0
        projected[np.arange(keep), np.arange(keep)] = theta[sel]
        coupling = beta * ritz[dim - 1, sel]
        projected[keep, :keep] = coupling
        projected[:keep, keep] = coupling
        dim = keep + 1


def denoise_patches(patches: PatchSet, basis: SpectralBasis, count: int) -> PatchSet:
    """Project every patch-coordinate slot onto the leading eigenvectors.

    For each of the rho^2 patch coordinates, the vector of that coordinate
    across all patches is projected onto the span of the first ``count``
    basis vectors.  Values are not clamped.
    """
    if not (1 <= count <= basis.count):
        raise ValueError(
            f"projection count must be in [1, {basis.count}], got {count}"
        )
    if basis.size != patches.count:
        raise ValueError(
            f"basis dimension {basis.size} does not match patch count {patches.count}"
        )
    vectors = basis.vectors[:count]
    coefficients = vectors @ patches.patches  # (count, rho^2)
    projected = vectors.T @ coefficients
    return PatchSet(n=patches.n, rho=patches.rho, patches=projected)

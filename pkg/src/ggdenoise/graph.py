"""Patch-space graphs and geodesic distances.

A k-nearest-neighbor graph over patches approximates the manifold the
patch-set lives on; shortest paths in that graph stand in for geodesic
distances.  This module also builds the Gaussian edge weights and
symmetric normalized Laplacian used by the Laplacian-eigenvector
denoising baseline.
"""

from __future__ import annotations

import struct
import warnings
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import scipy.sparse as sp

from . import accel
from .errors import DisconnectedGraphWarning, IsolatedVertexError
from .packed import PackedSymmetricMatrix, packed_length
from .patch import PatchSet

METRIC_PATCH = "patch-euclidean"
METRIC_GLD = "gld-penalized"

_DISTANCES_MAGIC = b"GGD1"


@dataclass(frozen=True)
class PatchGraph:
    """Symmetric weighted k-NN graph over patch vertices.

    ``adjacency`` is CSR with explicit zeros kept: a stored zero is a
    zero-length edge (duplicate patches), not a missing one.
    """

    vertex_count: int
    adjacency: sp.csr_matrix
    metric_kind: str
    beta: float = 0.0

    @property
    def edge_count(self) -> int:
        """Number of undirected edges."""
        return self.adjacency.nnz // 2

    def degrees(self) -> np.ndarray:
        return np.diff(self.adjacency.indptr)


@dataclass(frozen=True)
class GeodesicDistances:
    """Dense symmetric matrix of shortest-path lengths, packed storage."""

    matrix: PackedSymmetricMatrix

    @property
    def size(self) -> int:
        return self.matrix.size

    def to_dense(self) -> np.ndarray:
        return self.matrix.to_dense()

    def element(self, i: int, j: int) -> float:
        return self.matrix.element(i, j)

    def dump(self, path) -> None:
        """Binary checkpoint: magic ``GGD1``, u64-LE size, packed f64-LE.

        Packed order is the in-memory layout: entry (i, j) with i <= j at
        offset i + j*(j+1)//2.
        """
        path = Path(path)
        with path.open("wb") as fh:
            fh.write(_DISTANCES_MAGIC)
            fh.write(struct.pack("<Q", self.size))
            fh.write(self.matrix.buf.astype("<f8", copy=False).tobytes())

    @classmethod
    def load(cls, path) -> "GeodesicDistances":
        path = Path(path)
        raw = path.read_bytes()
        if raw[:4] != _DISTANCES_MAGIC:
            raise ValueError(f"{path}: not a geodesic distance dump")
        (size,) = struct.unpack("<Q", raw[4:12])
        buf = np.frombuffer(raw[12:], dtype="<f8")
        if buf.shape[0] != packed_length(size):
            raise ValueError(f"{path}: truncated distance dump")
        return cls(PackedSymmetricMatrix(size, buf.astype(np.float64)))


@dataclass(frozen=True)
class GldWeights:
    """Gaussian edge weights W and vertex degree sums for the Laplacian."""

    weights: sp.csr_matrix
    gamma: float
    degree_sums: np.ndarray

    @property
    def size(self) -> int:
        return self.weights.shape[0]


def patch_distance(a: np.ndarray, b: np.ndarray) -> float:
    """Euclidean distance between two flattened patches."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise ValueError(f"patch dimensions differ: {a.shape} vs {b.shape}")
    return float(np.sqrt(np.sum((a - b) ** 2)))


def gld_distance(
    a: np.ndarray, b: np.ndarray, xa, xb, beta: float
) -> float:
    """Patch distance plus ``beta`` times the pixel-coordinate distance."""
    if beta < 0:
        raise ValueError("beta must be nonnegative")
    xa = np.asarray(xa, dtype=np.float64)
    xb = np.asarray(xb, dtype=np.float64)
    return patch_distance(a, b) + beta * float(np.sqrt(np.sum((xa - xb) ** 2)))


def _center_coords(n: int) -> np.ndarray:
    """(n*n, 2) pixel coordinates of patch centers, row-major order."""
    k = np.arange(n * n)
    return np.stack([k // n, k % n], axis=1).astype(np.float64)


def build_knn_graph(
    patches,
    delta: int,
    metric_kind: str = METRIC_PATCH,
    beta: float = 0.0,
    coords: np.ndarray | None = None,
) -> PatchGraph:
    """Connect each vertex to its delta nearest neighbors, then symmetrize.

    ``patches`` is a :class:`PatchSet` or a plain (m, d) point array.  The
    neighbor relation is the "either selected" union, so every vertex ends
    with degree >= delta.  Ties are broken toward the smaller index.  For
    the penalized metric, pixel coordinates come from the patch layout or
    must be passed explicitly for raw arrays.
    """
    if isinstance(patches, PatchSet):
        points = patches.patches
        if coords is None:
            coords = _center_coords(patches.n)
    else:
        points = np.ascontiguousarray(patches, dtype=np.float64)
        if points.ndim != 2:
            raise ValueError("expected a PatchSet or (m, d) array")
    m = points.shape[0]
    if not (1 <= delta < m):
        raise ValueError(f"neighbor count must satisfy 1 <= delta < {m}, got {delta}")
    if metric_kind not in (METRIC_PATCH, METRIC_GLD):
        raise ValueError(f"unknown metric kind {metric_kind!r}")
    if beta < 0:
        raise ValueError("beta must be nonnegative")
    beta_eff = beta if metric_kind == METRIC_GLD else 0.0
    if beta_eff > 0.0 and coords is None:
        raise ValueError("penalized metric on a raw array requires coords")
    if coords is None:
        coords = np.zeros((m, 2))
    coords = np.ascontiguousarray(coords, dtype=np.float64)

    neigh_idx, neigh_dist = accel.knn_neighbors(points, coords, beta_eff, delta)

    src = np.repeat(np.arange(m, dtype=np.int64), delta)
    dst = neigh_idx.ravel()
    wgt = neigh_dist.ravel()
    rows = np.concatenate([src, dst])
    cols = np.concatenate([dst, src])
    vals = np.concatenate([wgt, wgt])
    keys = rows * m + cols
    _, first = np.unique(keys, return_index=True)
    adjacency = sp.coo_matrix(
        (vals[first], (rows[first], cols[first])), shape=(m, m)
    ).tocsr()
    return PatchGraph(
        vertex_count=m, adjacency=adjacency, metric_kind=metric_kind, beta=beta
    )


def all_pairs_shortest_paths(
    graph: PatchGraph, backend: str = "dijkstra"
) -> GeodesicDistances:
    """Exact shortest-path lengths between all vertex pairs.

    ``backend`` is "dijkstra" (repeated heap Dijkstra over the sparse
    graph, the default) or "floyd" (dense O(V^3), practical up to a few
    thousand vertices).  Both produce the same matrix to within float
    roundoff.  If the graph is disconnected, unreachable distances are
    replaced by 1.5x the largest finite distance and a
    :class:`DisconnectedGraphWarning` is emitted.
    """
    m = graph.vertex_count
    adj = graph.adjacency
    if backend == "floyd":
        dense = np.full((m, m), np.inf)
        np.fill_diagonal(dense, 0.0)
        rows = np.repeat(np.arange(m), np.diff(adj.indptr))
        dense[rows, adj.indices] = adj.data
        accel.floyd_warshall(dense)
        packed = PackedSymmetricMatrix.from_dense(dense)
    elif backend == "dijkstra":
        buf = np.empty(packed_length(m))
        accel.apsp_dijkstra_packed(
            adj.indptr.astype(np.int64),
            adj.indices.astype(np.int64),
            adj.data.astype(np.float64),
            m,
            buf,
        )
        packed = PackedSymmetricMatrix(m, buf)
    else:
        raise ValueError(f"unknown shortest-path backend {backend!r}")

    unreachable = np.isinf(packed.buf)
    if unreachable.any():
        finite = packed.buf[~unreachable]
        fill = 1.5 * float(finite.max()) if finite.size and finite.max() > 0 else 1.0
        packed.buf[unreachable] = fill
        warnings.warn(
            DisconnectedGraphWarning(
                f"patch graph is disconnected: {int(unreachable.sum())} "
                f"unreachable pairs inflated to {fill:.6g}"
            ),
            stacklevel=2,
        )
    return GeodesicDistances(packed)


def gld_weight_matrix(graph: PatchGraph, gamma: float) -> GldWeights:
    """Gaussian weights exp(-d^2 / gamma^2) on every graph edge."""
    if gamma <= 0:
        raise ValueError("gamma must be positive")
    if graph.metric_kind != METRIC_GLD:
        raise ValueError(
            f"weight matrix requires a graph built with the {METRIC_GLD!r} metric"
        )
    weights = graph.adjacency.copy()
    weights.data = np.exp(-(weights.data**2) / (gamma * gamma))
    degree_sums = np.asarray(weights.sum(axis=1)).ravel()
    return GldWeights(weights=weights, gamma=gamma, degree_sums=degree_sums)


def graph_laplacian(weights: GldWeights) -> sp.csr_matrix:
    """Symmetric normalized Laplacian I - D^{-1/2} W D^{-1/2}."""
    deg = weights.degree_sums
    if np.any(deg <= 0):
        bad = int(np.flatnonzero(deg <= 0)[0])
        raise IsolatedVertexError(
            f"vertex {bad} has zero degree; Laplacian normalization undefined"
        )
    m = weights.size
    inv_sqrt = 1.0 / np.sqrt(deg)
    scaled = weights.weights.copy()
    rows = np.repeat(np.arange(m), np.diff(scaled.indptr))
    scaled.data *= inv_sqrt[rows] * inv_sqrt[scaled.indices]
    laplacian = (sp.identity(m, format="csr") - scaled).tocsr()
    return laplacian

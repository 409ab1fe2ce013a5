"""Pure numpy/scipy implementations of the hot kernels.

Fallback path used when numba is unavailable or disabled via the
``GGDENOISE_NUMBA`` environment variable.  Matches `_kernels_numba`
function for function: exact brute-force k-NN (ties broken by smaller
index), all-pairs Dijkstra written into packed symmetric storage, and
in-place Floyd-Warshall.
"""

from __future__ import annotations

import numpy as np
import scipy.sparse as sp
from scipy.sparse import csgraph

# ~128 MB of float64 per distance block
_BLOCK_ENTRIES = 2**24


def knn_neighbors(
    points: np.ndarray, coords: np.ndarray, beta: float, delta: int
) -> tuple[np.ndarray, np.ndarray]:
    """Exact delta nearest neighbors per row, self excluded.

    Returns (indices, distances), each (m, delta), rows ordered by
    (distance, index) ascending.  The metric is the Euclidean patch
    distance, plus ``beta`` times the Euclidean pixel distance when beta
    is positive.  Candidates come from a blocked Gram-matrix expansion;
    final distances and tie ranking are recomputed exactly.
    """
    points = np.ascontiguousarray(points, dtype=np.float64)
    m = points.shape[0]
    sq_norms = np.einsum("ij,ij->i", points, points)
    block = max(1, min(m, _BLOCK_ENTRIES // m))
    idx_out = np.empty((m, delta), dtype=np.int64)
    dist_out = np.empty((m, delta))
    for start in range(0, m, block):
        stop = min(start + block, m)
        rows = np.arange(start, stop)
        d2 = sq_norms[start:stop, None] + sq_norms[None, :]
        d2 -= 2.0 * (points[start:stop] @ points.T)
        np.maximum(d2, 0.0, out=d2)
        if beta > 0.0:
            metric = np.sqrt(d2)
            dx = coords[start:stop, 0][:, None] - coords[None, :, 0]
            dy = coords[start:stop, 1][:, None] - coords[None, :, 1]
            metric += beta * np.sqrt(dx * dx + dy * dy)
        else:
            metric = d2  # monotone surrogate, final values recomputed below
        metric[rows - start, rows] = np.inf
        part = np.argpartition(metric, delta - 1, axis=1)[:, :delta]
        boundary = np.take_along_axis(metric, part, axis=1).max(axis=1)
        # Slack absorbs Gram-expansion rounding so no true member of the
        # neighbor set can fall outside the candidate pool.
        cutoff = boundary + 1e-9 * (np.abs(boundary) + 1.0)
        counts = (metric <= cutoff[:, None]).sum(axis=1)
        plain = counts == delta
        if np.any(plain):
            _rank_candidates(
                points, coords, beta, rows[plain], part[plain], idx_out, dist_out
            )
        for r in np.flatnonzero(~plain):
            i = start + r
            cand = np.flatnonzero(metric[r] <= cutoff[r])
            exact = _exact_metric(points, coords, beta, i, cand)
            order = np.lexsort((cand, exact))[:delta]
            idx_out[i] = cand[order]
            dist_out[i] = exact[order]
    return idx_out, dist_out


def _rank_candidates(points, coords, beta, row_ids, cand, idx_out, dist_out):
    """Exactly recompute and (distance, index)-order unambiguous rows."""
    diffs = points[cand] - points[row_ids][:, None, :]
    exact = np.sqrt(np.einsum("rkc,rkc->rk", diffs, diffs))
    if beta > 0.0:
        dx = coords[cand, 0] - coords[row_ids, 0][:, None]
        dy = coords[cand, 1] - coords[row_ids, 1][:, None]
        exact += beta * np.sqrt(dx * dx + dy * dy)
    by_index = np.argsort(cand, axis=1)
    cand = np.take_along_axis(cand, by_index, axis=1)
    exact = np.take_along_axis(exact, by_index, axis=1)
    by_dist = np.argsort(exact, axis=1, kind="stable")
    idx_out[row_ids] = np.take_along_axis(cand, by_dist, axis=1)
    dist_out[row_ids] = np.take_along_axis(exact, by_dist, axis=1)


def _exact_metric(points, coords, beta, i, targets):
    diffs = points[targets] - points[i]
    exact = np.sqrt(np.einsum("kc,kc->k", diffs, diffs))
    if beta > 0.0:
        dx = coords[targets, 0] - coords[i, 0]
        dy = coords[targets, 1] - coords[i, 1]
        exact += beta * np.sqrt(dx * dx + dy * dy)
    return exact


def apsp_dijkstra_packed(
    indptr: np.ndarray,
    indices: np.ndarray,
    weights: np.ndarray,
    size: int,
    out: np.ndarray,
) -> None:
    """All-pairs shortest paths into a packed upper-triangular buffer.

    ``out[i + j*(j+1)//2] = d(i, j)`` for i <= j; unreachable pairs are
    left at inf.  Explicit zero weights are honored as zero-length edges.
    """
    graph = sp.csr_matrix((weights, indices, indptr), shape=(size, size))
    block = max(1, min(size, _BLOCK_ENTRIES // size))
    for start in range(0, size, block):
        stop = min(start + block, size)
        dist = csgraph.dijkstra(graph, directed=False, indices=np.arange(start, stop))
        for r in range(stop - start):
            j = start + r
            lo = j * (j + 1) // 2
            out[lo : lo + j + 1] = dist[r, : j + 1]


def floyd_warshall(dist: np.ndarray) -> None:
    """In-place Floyd-Warshall on a dense distance matrix (inf = no edge)."""
    m = dist.shape[0]
    for k in range(m):
        np.minimum(dist, dist[:, k, None] + dist[None, k, :], out=dist)

"""Numba-compiled implementations of the hot kernels.

Same contracts as `_kernels_numpy`.  Dijkstra runs data-parallel over
sources with one binary heap per thread; each source writes only its own
packed column, so there are no overlapping writes and results do not
depend on scheduling.
"""

from __future__ import annotations

import numpy as np
from numba import njit, prange


@njit(cache=True, parallel=True)
def knn_neighbors(points, coords, beta, delta):
    m, dim = points.shape
    idx_out = np.empty((m, delta), dtype=np.int64)
    dist_out = np.empty((m, delta), dtype=np.float64)
    for i in prange(m):
        metric = np.empty(m)
        for j in range(m):
            acc = 0.0
            for c in range(dim):
                t = points[i, c] - points[j, c]
                acc += t * t
            val = np.sqrt(acc)
            if beta > 0.0:
                dx = coords[i, 0] - coords[j, 0]
                dy = coords[i, 1] - coords[j, 1]
                val += beta * np.sqrt(dx * dx + dy * dy)
            metric[j] = val
        metric[i] = np.inf
        order = np.argsort(metric, kind="mergesort")  # stable: ties keep index order
        for s in range(delta):
            idx_out[i, s] = order[s]
            dist_out[i, s] = metric[order[s]]
    return idx_out, dist_out


@njit(cache=True, parallel=True)
def apsp_dijkstra_packed(indptr, indices, weights, size, out):
    # pushes are bounded by one per directed edge, plus the source itself
    cap = weights.shape[0] + 2
    for src in prange(size):
        dist = np.full(size, np.inf)
        done = np.zeros(size, dtype=np.uint8)
        heap_d = np.empty(cap)
        heap_v = np.empty(cap, dtype=np.int64)
        dist[src] = 0.0
        heap_d[0] = 0.0
        heap_v[0] = src
        hsize = 1
        remaining = src + 1  # symmetry: only targets 0..src are stored
        while hsize > 0 and remaining > 0:
            top_d = heap_d[0]
            top_v = heap_v[0]
            hsize -= 1
            heap_d[0] = heap_d[hsize]
            heap_v[0] = heap_v[hsize]
            pos = 0
            while True:
                child = 2 * pos + 1
                if child >= hsize:
                    break
                if child + 1 < hsize and heap_d[child + 1] < heap_d[child]:
                    child += 1
                if heap_d[child] < heap_d[pos]:
                    td = heap_d[pos]
                    heap_d[pos] = heap_d[child]
                    heap_d[child] = td
                    tv = heap_v[pos]
                    heap_v[pos] = heap_v[child]
                    heap_v[child] = tv
                    pos = child
                else:
                    break
            if done[top_v]:
                continue
            done[top_v] = 1
            if top_v <= src:
                remaining -= 1
            for e in range(indptr[top_v], indptr[top_v + 1]):
                u = indices[e]
                if done[u]:
                    continue
                nd = top_d + weights[e]
                if nd < dist[u]:
                    dist[u] = nd
                    heap_d[hsize] = nd
                    heap_v[hsize] = u
                    pos = hsize
                    hsize += 1
                    while pos > 0:
                        parent = (pos - 1) // 2
                        if heap_d[pos] < heap_d[parent]:
                            td = heap_d[pos]
                            heap_d[pos] = heap_d[parent]
                            heap_d[parent] = td
                            tv = heap_v[pos]
                            heap_v[pos] = heap_v[parent]
                            heap_v[parent] = tv
                            pos = parent
                        else:
                            break
        lo = src * (src + 1) // 2
        for v in range(src + 1):
            out[lo + v] = dist[v]


@njit(cache=True, parallel=True)
def floyd_warshall(dist):
    m = dist.shape[0]
    for k in range(m):
        for i in prange(m):
            dik = dist[i, k]
            if dik == np.inf:
                continue
            for j in range(m):
                nd = dik + dist[k, j]
                if nd < dist[i, j]:
                    dist[i, j] = nd

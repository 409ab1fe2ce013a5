"""Kernel backend selection.

The heavy inner loops (k-NN search, all-pairs shortest paths,
Floyd-Warshall) exist twice: numba-compiled kernels and a numpy/scipy
fallback with identical contracts.  The ``GGDENOISE_NUMBA`` environment
variable picks the backend at import time:

* unset or empty: numba when importable, fallback otherwise;
* ``0`` / ``false`` / ``off``: force the numpy fallback;
* ``1`` / ``true`` / ``on``: require numba (ImportError surfaces).

``bench/bench_kernels.py`` compares the two paths head to head.
"""

from __future__ import annotations

import os

_FLAG = os.environ.get("GGDENOISE_NUMBA", "").strip().lower()
if _FLAG in {"0", "false", "off", "no"}:
    _want_numba = False
elif _FLAG in {"1", "true", "on", "yes"}:
    _want_numba = True
elif _FLAG == "":
    _want_numba = None
else:
    raise RuntimeError(f"GGDENOISE_NUMBA must be 0 or 1, got {_FLAG!r}")

if _want_numba is False:
    from . import _kernels_numpy as _impl

    BACKEND = "numpy"
else:
    # Prefer omp so numba does not probe TBB first (old TBB builds trigger
    # a warning on every import before numba falls back anyway).
    os.environ.setdefault("NUMBA_THREADING_LAYER_PRIORITY", "omp workqueue tbb")
    try:
        from . import _kernels_numba as _impl

        BACKEND = "numba"
    except ImportError:
        if _want_numba:
            raise
        from . import _kernels_numpy as _impl

        BACKEND = "numpy"

knn_neighbors = _impl.knn_neighbors
apsp_dijkstra_packed = _impl.apsp_dijkstra_packed
floyd_warshall = _impl.floyd_warshall


def set_threads(count: int) -> None:
    """Bound kernel parallelism; 0 keeps the backend default."""
    if count > 0 and BACKEND == "numba":
        import numba

        numba.set_num_threads(min(count, numba.config.NUMBA_NUM_THREADS))

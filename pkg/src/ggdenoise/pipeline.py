"""End-to-end denoising pipelines and the parameter-sweep harness.

Two methods share the patch extraction and Shepard merging stages:

* ``ggd``: k-NN graph on raw patch distances, geodesic (shortest-path)
  distances, double-centered Gramian, projection onto its leading
  eigenvectors.
* ``gld``: k-NN graph on the coordinate-penalized metric, Gaussian edge
  weights, symmetric normalized Laplacian, projection onto its smallest
  eigenvectors.

The sweep harness runs Cartesian parameter grids, reusing the expensive
graph/eigen stages across eigenvector thresholds, and serializes results
as CSV.
"""

from __future__ import annotations

import hashlib
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import PipelineError
from .graph import (
    METRIC_GLD,
    GeodesicDistances,
    all_pairs_shortest_paths,
    build_knn_graph,
    gld_weight_matrix,
    graph_laplacian,
)
from .image_core import Image, NoiseSpec, add_uniform_noise, reconstruction_error
from .patch import PatchSet, extract_patches, merge_patches
from .spectral import (
    SOURCE_GRAMIAN,
    SOURCE_LAPLACIAN,
    SpectralBasis,
    denoise_patches,
    gramian_from_distances,
    top_eigenpairs,
)

METHODS = ("ggd", "gld")
BACKENDS = ("floyd", "dijkstra")

# Refuse larger inputs unless overridden: the packed geodesic matrix grows
# as n^4 / 2 doubles (n = 200 is already ~6.4 GB).
MAX_VERTICES = 40_000

# Gaussian weight scale gamma (and the beta trade-off) assume patch
# intensities in [0, 1]; on raw 8-bit distances exp(-d^2/gamma^2)
# underflows to zero and every vertex ends up isolated.  The graph stage
# therefore runs on normalized intensities; projection and merging stay
# in raw units.
GLD_INTENSITY_SCALE = 1.0 / 255.0

CSV_HEADER = "method,epsilon,seed,rho,delta,L,beta,gamma,delta_input,delta_output,wall_time_s"


@dataclass(frozen=True)
class DenoiseConfig:
    """Parameters for one denoising run.

    ``beta`` and ``gamma`` only apply to the ``gld`` method.  The pipeline
    itself is deterministic given its inputs; randomness enters only
    through noise seeds upstream.
    """

    method: str
    rho: int = 5
    delta: int = 10
    L: int = 15
    beta: float = 3.0
    gamma: float = 5.0
    aps_backend: str = "dijkstra"

    def validate(self, n: int | None = None) -> None:
        if self.method not in METHODS:
            raise ValueError(f"method must be one of {METHODS}, got {self.method!r}")
        if self.rho % 2 == 0:
            raise ValueError("patch length must be odd")
        if self.rho < 3:
            raise ValueError("patch length must be at least 3")
        if self.delta < 1:
            raise ValueError("neighbor count must be at least 1")
        if self.L < 1:
            raise ValueError("eigenvector threshold must be at least 1")
        if self.aps_backend not in BACKENDS:
            raise ValueError(
                f"shortest-path backend must be one of {BACKENDS}, got {self.aps_backend!r}"
            )
        if self.method == "gld":
            if self.beta < 0:
                raise ValueError("beta must be nonnegative")
            if self.gamma <= 0:
                raise ValueError("gamma must be positive")
        if n is not None:
            m = n * n
            if self.rho >= 2 * n:
                raise ValueError(f"patch length must satisfy rho < 2n = {2 * n}")
            if self.delta >= m:
                raise ValueError(f"neighbor count must be below n^2 = {m}")
            if self.L > m:
                raise ValueError(f"eigenvector threshold must be at most n^2 = {m}")


def projected_memory_bytes(n: int, rho: int, delta: int, L: int = 15) -> dict:
    """Footprint estimate for the dominant allocations at image side n."""
    m = n * n
    packed = m * (m + 1) // 2 * 8
    return {
        "vertices": m,
        "geodesic_matrix": packed,
        "gramian_matrix": packed,
        "patches": m * rho * rho * 8,
        "graph_edges": 2 * m * delta * 16,
        "basis": L * m * 8,
        "peak_estimate": 2 * packed + m * rho * rho * 8 + 2 * m * delta * 16 + L * m * 8,
    }


def _check_memory_guard(n: int, override: bool) -> None:
    m = n * n
    if m > MAX_VERTICES and not override:
        footprint = projected_memory_bytes(n, 5, 10)
        raise PipelineError(
            f"image side {n} gives {m} patch vertices (limit {MAX_VERTICES}); "
            f"the geodesic matrix alone would take "
            f"{footprint['geodesic_matrix'] / 1e9:.1f} GB packed. "
            "Pass override_memory_guard (CLI: --override-memory-guard) to proceed."
        )


def _with_constant_direction(basis: SpectralBasis) -> SpectralBasis:
    """Widen the projection span by the normalized constant vector.

    Double centering forces the constant direction into the Gramian's
    kernel, so none of the retained eigenvectors can represent the image
    mean; projecting without it would shift the output toward zero.  The
    constant is orthogonalized against the basis and dropped when the
    span already contains it (complete bases).
    """
    m = basis.size
    ones = np.full(m, 1.0 / math.sqrt(m))
    resid = ones - basis.vectors.T @ (basis.vectors @ ones)
    resid -= basis.vectors.T @ (basis.vectors @ resid)
    norm = float(np.linalg.norm(resid))
    if norm <= 1e-8:
        return basis
    return SpectralBasis(
        source=basis.source,
        values=np.concatenate([basis.values, [0.0]]),
        vectors=np.vstack([basis.vectors, resid / norm]),
    )


def _apply_basis(patches: PatchSet, basis: SpectralBasis, count: int) -> Image:
    kept = basis.take(count)
    if kept.source == SOURCE_GRAMIAN:
        kept = _with_constant_direction(kept)
    denoised = denoise_patches(patches, kept, kept.count)
    return merge_patches(denoised)


def _ggd_stages(
    noisy: Image, rho: int, delta: int, backend: str, L_max: int
) -> tuple[PatchSet, SpectralBasis]:
    patches = extract_patches(noisy, rho)
    graph = build_knn_graph(patches, delta)
    distances = all_pairs_shortest_paths(graph, backend)
    del graph
    gram = gramian_from_distances(distances)
    del distances
    basis = top_eigenpairs(gram, L_max, "largest", source=SOURCE_GRAMIAN)
    return patches, basis


def _gld_stages(
    noisy: Image, rho: int, delta: int, beta: float, gamma: float, L_max: int
) -> tuple[PatchSet, SpectralBasis]:
    patches = extract_patches(noisy, rho)
    graph_patches = PatchSet(
        n=patches.n, rho=patches.rho, patches=patches.patches * GLD_INTENSITY_SCALE
    )
    graph = build_knn_graph(graph_patches, delta, METRIC_GLD, beta)
    weights = gld_weight_matrix(graph, gamma)
    laplacian = graph_laplacian(weights)
    basis = top_eigenpairs(laplacian, L_max, "smallest", source=SOURCE_LAPLACIAN)
    return patches, basis


def ggd_denoise(
    image: Image, config: DenoiseConfig, *, override_memory_guard: bool = False
) -> Image:
    """Geodesic-Gramian denoising of a (typically noisy) image."""
    if config.method != "ggd":
        raise ValueError(f"config.method is {config.method!r}, expected 'ggd'")
    config.validate(image.n)
    _check_memory_guard(image.n, override_memory_guard)
    patches, basis = _ggd_stages(
        image, config.rho, config.delta, config.aps_backend, config.L
    )
    return _apply_basis(patches, basis, config.L)


def gld_denoise(
    image: Image, config: DenoiseConfig, *, override_memory_guard: bool = False
) -> Image:
    """Laplacian-eigenvector denoising baseline."""
    if config.method != "gld":
        raise ValueError(f"config.method is {config.method!r}, expected 'gld'")
    config.validate(image.n)
    _check_memory_guard(image.n, override_memory_guard)
    patches, basis = _gld_stages(
        image, config.rho, config.delta, config.beta, config.gamma, config.L
    )
    return _apply_basis(patches, basis, config.L)


def denoise(
    image: Image, config: DenoiseConfig, *, override_memory_guard: bool = False
) -> Image:
    if config.method == "ggd":
        return ggd_denoise(image, config, override_memory_guard=override_memory_guard)
    if config.method == "gld":
        return gld_denoise(image, config, override_memory_guard=override_memory_guard)
    raise ValueError(f"method must be one of {METHODS}, got {config.method!r}")


@dataclass(frozen=True)
class SweepRow:
    method: str
    epsilon: float
    seed: int
    rho: int
    delta: int
    L: int
    beta: float | None
    gamma: float | None
    delta_input: float | None
    delta_output: float | None
    wall_time_s: float
    error: str | None = None


@dataclass(frozen=True)
class SweepReport:
    rows: tuple

    def to_csv(self, path) -> None:
        """CSV with the fixed header; "NA" marks inapplicable fields."""
        lines = [CSV_HEADER]
        for row in self.rows:
            lines.append(
                ",".join(
                    [
                        row.method,
                        _fmt(row.epsilon),
                        str(row.seed),
                        str(row.rho),
                        str(row.delta),
                        str(row.L),
                        _fmt(row.beta),
                        _fmt(row.gamma),
                        _fmt(row.delta_input),
                        _fmt(row.delta_output),
                        f"{row.wall_time_s:.3f}",
                    ]
                )
            )
        Path(path).write_text("\n".join(lines) + "\n")

    def best(self) -> SweepRow | None:
        scored = [r for r in self.rows if r.delta_output is not None]
        return min(scored, key=lambda r: r.delta_output) if scored else None

    def failures(self) -> list:
        return [r for r in self.rows if r.error is not None]


def _fmt(value) -> str:
    return "NA" if value is None else repr(float(value))


def run_sweep(
    image: Image,
    *,
    epsilons,
    rhos,
    deltas,
    Ls,
    methods=("ggd",),
    seeds=(0,),
    beta: float = 3.0,
    gamma: float = 5.0,
    backend: str = "dijkstra",
    workers: int = 1,
    checkpoint_dir=None,
    override_memory_guard: bool = False,
    reference: Image | None = None,
) -> SweepReport:
    """Cartesian-product sweep with per-run noise regeneration by seed.

    ``image`` is corrupted per (epsilon, seed) cell; errors are measured
    against ``reference`` (default: the input itself).  Rows that share
    (method, epsilon, seed, rho, delta) reuse one graph/eigensolver pass
    across all eigenvector thresholds; with a checkpoint directory the
    geodesic matrix and basis also persist across invocations.  Failures
    are recorded per row without aborting the sweep.  Rows come back
    sorted by grid coordinates; the first row of each group carries the
    shared stage time.
    """
    epsilons = [float(e) for e in epsilons]
    rhos = [int(r) for r in rhos]
    deltas = [int(d) for d in deltas]
    Ls = sorted({int(value) for value in Ls})
    seeds = [int(s) for s in seeds]
    methods = list(methods)
    if not (epsilons and rhos and deltas and Ls and methods and seeds):
        raise ValueError("empty sweep grid")
    for method in methods:
        if method not in METHODS:
            raise ValueError(f"method must be one of {METHODS}, got {method!r}")
    if backend not in BACKENDS:
        raise ValueError(f"shortest-path backend must be one of {BACKENDS}")
    _check_memory_guard(image.n, override_memory_guard)
    if reference is None:
        reference = image
    elif reference.n != image.n:
        raise ValueError("reference image size does not match the sweep input")
    checkpoint = str(checkpoint_dir) if checkpoint_dir is not None else None

    tasks = [
        (image, reference, method, eps, seed, rho, delta, tuple(Ls), beta, gamma, backend, checkpoint)
        for method in methods
        for eps in epsilons
        for seed in seeds
        for rho in rhos
        for delta in deltas
    ]
    if workers > 1:
        import multiprocessing as mp

        ctx = mp.get_context("spawn")
        with ProcessPoolExecutor(
            max_workers=workers, mp_context=ctx, initializer=_sweep_worker_init
        ) as pool:
            grouped = list(pool.map(_run_group, tasks))
    else:
        grouped = [_run_group(task) for task in tasks]

    rows = [row for group in grouped for row in group]
    rows.sort(key=lambda r: (r.method, r.epsilon, r.seed, r.rho, r.delta, r.L))
    return SweepReport(rows=tuple(rows))


def _sweep_worker_init() -> None:
    # One kernel thread per worker: group-level parallelism already fills cores.
    try:
        import numba

        numba.set_num_threads(1)
    except ImportError:
        pass


def _run_group(task) -> list:
    (
        image,
        reference,
        method,
        epsilon,
        seed,
        rho,
        delta,
        Ls,
        beta,
        gamma,
        backend,
        checkpoint,
    ) = task
    beta_out = beta if method == "gld" else None
    gamma_out = gamma if method == "gld" else None

    def make_row(level, delta_input, delta_output, wall, error) -> SweepRow:
        return SweepRow(
            method=method,
            epsilon=epsilon,
            seed=seed,
            rho=rho,
            delta=delta,
            L=level,
            beta=beta_out,
            gamma=gamma_out,
            delta_input=delta_input,
            delta_output=delta_output,
            wall_time_s=wall,
            error=error,
        )

    def level_error(level) -> str | None:
        try:
            DenoiseConfig(
                method=method, rho=rho, delta=delta, L=level, beta=beta, gamma=gamma,
                aps_backend=backend,
            ).validate(image.n)
            return None
        except ValueError as exc:
            return str(exc)

    per_level_error = {level: level_error(level) for level in Ls}
    valid_levels = [level for level in Ls if per_level_error[level] is None]
    rows = [
        make_row(level, None, None, 0.0, per_level_error[level])
        for level in Ls
        if per_level_error[level] is not None
    ]
    if not valid_levels:
        return rows

    start = time.perf_counter()
    try:
        config = DenoiseConfig(
            method=method,
            rho=rho,
            delta=delta,
            L=max(valid_levels),
            beta=beta,
            gamma=gamma,
            aps_backend=backend,
        )
        noisy = add_uniform_noise(image, NoiseSpec(epsilon=epsilon, seed=seed))
        delta_input = reconstruction_error(reference, noisy)
        patches, basis = _group_stages(noisy, config, checkpoint)
    except Exception as exc:  # noqa: BLE001 - per-row error reporting
        message = str(exc)
        rows.extend(make_row(level, None, None, 0.0, message) for level in valid_levels)
        return rows
    shared_time = time.perf_counter() - start

    for index, level in enumerate(valid_levels):
        t0 = time.perf_counter()
        try:
            output = _apply_basis(patches, basis, level)
            delta_output = reconstruction_error(reference, output)
            error = None
        except Exception as exc:  # noqa: BLE001
            delta_output = None
            error = str(exc)
        wall = time.perf_counter() - t0 + (shared_time if index == 0 else 0.0)
        rows.append(make_row(level, delta_input, delta_output, wall, error))
    return rows


def _group_stages(noisy: Image, config: DenoiseConfig, checkpoint: str | None):
    if checkpoint is None:
        if config.method == "ggd":
            return _ggd_stages(
                noisy, config.rho, config.delta, config.aps_backend, config.L
            )
        return _gld_stages(
            noisy, config.rho, config.delta, config.beta, config.gamma, config.L
        )

    directory = Path(checkpoint)
    directory.mkdir(parents=True, exist_ok=True)
    tag = _stage_tag(noisy, config)
    source = SOURCE_GRAMIAN if config.method == "ggd" else SOURCE_LAPLACIAN
    basis_path = directory / f"{tag}-{source}.ggb1"
    patches = extract_patches(noisy, config.rho)
    if basis_path.exists():
        basis = SpectralBasis.load(basis_path, source)
        if basis.count >= config.L:
            return patches, basis

    if config.method == "ggd":
        distances_path = directory / f"{tag}.ggd1"
        if distances_path.exists():
            distances = GeodesicDistances.load(distances_path)
        else:
            graph = build_knn_graph(patches, config.delta)
            distances = all_pairs_shortest_paths(graph, config.aps_backend)
            distances.dump(distances_path)
        gram = gramian_from_distances(distances)
        del distances
        basis = top_eigenpairs(gram, config.L, "largest", source=SOURCE_GRAMIAN)
    else:
        _, basis = _gld_stages(
            noisy, config.rho, config.delta, config.beta, config.gamma, config.L
        )
    basis.dump(basis_path)
    return patches, basis


def _stage_tag(noisy: Image, config: DenoiseConfig) -> str:
    """Checkpoint key: image bytes plus every parameter the stages read."""
    digest = hashlib.sha256()
    digest.update(noisy.data.tobytes())
    parts = [config.method, str(config.rho), str(config.delta)]
    if config.method == "ggd":
        parts.append(config.aps_backend)
    else:
        parts.extend([repr(config.beta), repr(config.gamma)])
    digest.update("|".join(parts).encode("ascii"))
    return digest.hexdigest()[:20]

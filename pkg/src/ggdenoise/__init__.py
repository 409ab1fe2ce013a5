"""Patch-graph spectral image denoising.

Overlapping image patches become vertices of a nearest-neighbor graph;
shortest-path (geodesic) distances between them are double-centered into
a Gramian whose leading eigenvectors carry the prominent structure.
Projecting patches onto those eigenvectors and merging them back with
Shepard weights removes noise.  A graph-Laplacian variant is included as
a baseline, along with noise injection, an error metric, and a sweep
harness.
"""

from .errors import (
    ConvergenceError,
    DisconnectedGraphWarning,
    ImageFormatError,
    IsolatedVertexError,
    PipelineError,
)
from .graph import (
    METRIC_GLD,
    METRIC_PATCH,
    GeodesicDistances,
    GldWeights,
    PatchGraph,
    all_pairs_shortest_paths,
    build_knn_graph,
    gld_distance,
    gld_weight_matrix,
    graph_laplacian,
    patch_distance,
)
from .image_core import (
    Image,
    NoiseSpec,
    add_uniform_noise,
    load_image,
    quantize,
    reconstruction_error,
    save_image,
)
from .patch import (
    PatchSet,
    PixelNeighborhood,
    extract_patches,
    merge_patches,
    patch_index,
    pixel_neighborhood,
)
from .pipeline import (
    DenoiseConfig,
    SweepReport,
    SweepRow,
    denoise,
    ggd_denoise,
    gld_denoise,
    projected_memory_bytes,
    run_sweep,
)
from .spectral import (
    GramianMatrix,
    SpectralBasis,
    denoise_patches,
    gramian_from_distances,
    top_eigenpairs,
)
from .synthetic import (
    checkerboard,
    composite_scene,
    gaussian_blobs,
    linear_gradient,
    synthetic_image,
)

__version__ = "0.1.0"

__all__ = [
    "ConvergenceError",
    "DenoiseConfig",
    "DisconnectedGraphWarning",
    "GeodesicDistances",
    "GldWeights",
    "GramianMatrix",
    "Image",
    "ImageFormatError",
    "IsolatedVertexError",
    "METRIC_GLD",
    "METRIC_PATCH",
    "NoiseSpec",
    "PatchGraph",
    "PatchSet",
    "PipelineError",
    "PixelNeighborhood",
    "SpectralBasis",
    "SweepReport",
    "SweepRow",
    "add_uniform_noise",
    "all_pairs_shortest_paths",
    "build_knn_graph",
    "checkerboard",
    "composite_scene",
    "denoise",
    "denoise_patches",
    "extract_patches",
    "gaussian_blobs",
    "ggd_denoise",
    "gld_denoise",
    "gld_distance",
    "gld_weight_matrix",
    "gramian_from_distances",
    "graph_laplacian",
    "linear_gradient",
    "load_image",
    "merge_patches",
    "patch_distance",
    "patch_index",
    "pixel_neighborhood",
    "projected_memory_bytes",
    "quantize",
    "reconstruction_error",
    "run_sweep",
    "save_image",
    "synthetic_image",
    "top_eigenpairs",
]

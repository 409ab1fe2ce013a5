"""Overlapping square patches and their reassembly into an image.

An n-by-n image yields one patch per pixel: the rho-by-rho window centered
there, with edge replication where the window leaves the image.  Merging
goes the other way, combining every patch that covers a pixel with
Gaussian-of-distance (Shepard) weights.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .image_core import INTENSITY_MAX, Image


@dataclass(frozen=True)
class PatchSet:
    """All n^2 patches of an n-by-n image, one per pixel.

    Row k of ``patches`` (0-based, row-major pixel order) holds the window
    centered on pixel k, flattened row by row.  Values are not range
    checked: projected patch sets legitimately leave [0, 255].
    """

    n: int
    rho: int
    patches: np.ndarray  # (n*n, rho*rho) float64

    def __post_init__(self):
        arr = np.ascontiguousarray(self.patches, dtype=np.float64)
        if arr.shape != (self.n * self.n, self.rho * self.rho):
            raise ValueError(
                f"patch array has shape {self.patches.shape}, expected "
                f"({self.n * self.n}, {self.rho * self.rho})"
            )
        if not np.all(np.isfinite(arr)):
            raise ValueError("patch values must be finite")
        object.__setattr__(self, "patches", arr)

    @property
    def count(self) -> int:
        return self.patches.shape[0]


@dataclass(frozen=True)
class PixelNeighborhood:
    """Pixels within Chebyshev radius floor(rho/2) of a center pixel.

    Indices are 1-based row-major, matching :func:`patch_index`.
    """

    center: int
    members: np.ndarray


def patch_index(i: int, j: int, n: int) -> int:
    """Linear index of pixel (i, j), 1-based: k = n*(i-1) + j."""
    if not (1 <= i <= n and 1 <= j <= n):
        raise ValueError(f"pixel ({i}, {j}) out of range for side {n}")
    return n * (i - 1) + j


def _validate_rho(rho: int, n: int) -> None:
    if rho % 2 == 0:
        raise ValueError("patch length must be odd")
    if not (3 <= rho < 2 * n):
        raise ValueError(f"patch length must satisfy 3 <= rho < 2n, got {rho}")


def extract_patches(image: Image, rho: int) -> PatchSet:
    """One rho-by-rho patch per pixel, boundary handled by edge replication.

    Component order within each patch is row-major over the window, i.e.
    entry rho*a + b is the image value at (center_row - h + a,
    center_col - h + b) with h = rho // 2.
    """
    _validate_rho(rho, image.n)
    half = rho // 2
    padded = np.pad(image.data, half, mode="edge")
    windows = np.lib.stride_tricks.sliding_window_view(padded, (rho, rho))
    patches = windows.reshape(image.n * image.n, rho * rho)
    return PatchSet(n=image.n, rho=rho, patches=patches)


def pixel_neighborhood(k: int, n: int, rho: int) -> PixelNeighborhood:
    """Pixels whose patches cover pixel k, clipped to the image domain."""
    if not (1 <= k <= n * n):
        raise ValueError(f"pixel index {k} out of range for side {n}")
    _validate_rho(rho, n)
    half = rho // 2
    row, col = divmod(k - 1, n)
    rows = np.arange(max(0, row - half), min(n, row + half + 1))
    cols = np.arange(max(0, col - half), min(n, col + half + 1))
    members = (rows[:, None] * n + cols[None, :] + 1).ravel()
    return PixelNeighborhood(center=k, members=members)


def merge_patches(denoised: PatchSet) -> Image:
    """Reassemble an image from overlapping patches by Shepard weighting.

    Each pixel is the convex combination of the matching components of all
    patches whose window covers it, weighted by exp(-squared pixel
    distance) and renormalized over the members that exist near the
    boundary.  The result is clamped to [0, 255].
    """
    n, rho = denoised.n, denoised.rho
    half = rho // 2
    grid = denoised.patches.reshape(n, n, rho, rho)
    acc = np.zeros((n, n))
    weight_sum = np.zeros((n, n))
    for di in range(-half, half + 1):
        for dj in range(-half, half + 1):
            w = math.exp(-(di * di + dj * dj))
            # The patch centered at (i+di, j+dj) sees pixel (i, j) at
            # window offset (half-di, half-dj).
            i0, i1 = max(0, -di), n - max(0, di)
            j0, j1 = max(0, -dj), n - max(0, dj)
            acc[i0:i1, j0:j1] += (
                w * grid[i0 + di : i1 + di, j0 + dj : j1 + dj, half - di, half - dj]
            )
            weight_sum[i0:i1, j0:j1] += w
    merged = acc / weight_sum
    return Image(np.clip(merged, 0.0, INTENSITY_MAX))

"""Deterministic synthetic test images.

The project ships no photographs; these generators produce structured
scenes (smooth shading, hard edges, mild texture) that stand in for
natural images in tests and sweeps.  Everything is reproducible from the
seed.
"""

from __future__ import annotations

import numpy as np
from scipy.ndimage import gaussian_filter

from .image_core import Image

KINDS = ("checkerboard", "gradient", "blobs", "scene")


def checkerboard(n: int, cells: int = 8, low: float = 40.0, high: float = 215.0) -> Image:
    """Alternating squares, ``cells`` per side."""
    idx = np.arange(n) * cells // n
    board = (idx[:, None] + idx[None, :]) % 2
    return Image(np.where(board == 0, low, high).astype(np.float64))


def linear_gradient(n: int, low: float = 20.0, high: float = 235.0) -> Image:
    """Diagonal ramp from ``low`` to ``high``."""
    axis = np.linspace(0.0, 1.0, n)
    ramp = (axis[:, None] + axis[None, :]) / 2.0
    return Image(low + (high - low) * ramp)


def gaussian_blobs(n: int, count: int = 5, seed: int = 0) -> Image:
    """Soft bumps of random position, width, and signed amplitude."""
    rng = np.random.default_rng(seed)
    yy, xx = np.mgrid[0:n, 0:n] / max(n - 1, 1)
    field = np.full((n, n), 120.0)
    for _ in range(count):
        cy, cx = rng.uniform(0.1, 0.9, size=2)
        sigma = rng.uniform(0.06, 0.22)
        amp = rng.uniform(35.0, 95.0) * rng.choice([-1.0, 1.0])
        field += amp * np.exp(-((yy - cy) ** 2 + (xx - cx) ** 2) / (2 * sigma**2))
    return Image(np.clip(field, 0.0, 255.0))


def composite_scene(n: int, seed: int = 0) -> Image:
    """Natural-statistics stand-in: shading, blobs, hard shapes, texture."""
    rng = np.random.default_rng(seed)
    yy, xx = np.mgrid[0:n, 0:n] / max(n - 1, 1)
    field = 70.0 + 60.0 * xx + 35.0 * yy
    for _ in range(4):
        cy, cx = rng.uniform(0.1, 0.9, size=2)
        sigma = rng.uniform(0.08, 0.25)
        amp = rng.uniform(25.0, 65.0) * rng.choice([-1.0, 1.0])
        field += amp * np.exp(-((yy - cy) ** 2 + (xx - cx) ** 2) / (2 * sigma**2))
    # hard-edged shapes so edge preservation is exercised
    r0, r1 = int(0.15 * n), int(0.45 * n)
    c0, c1 = int(0.55 * n), int(0.85 * n)
    field[r0:r1, c0:c1] += 45.0
    disk = (yy - 0.68) ** 2 + (xx - 0.30) ** 2 <= 0.16**2
    field[disk] -= 50.0
    field += 8.0 * gaussian_filter(rng.standard_normal((n, n)), sigma=1.2)
    return Image(np.clip(field, 2.0, 253.0))


def synthetic_image(kind: str, n: int, seed: int = 0) -> Image:
    if kind == "checkerboard":
        return checkerboard(n)
    if kind == "gradient":
        return linear_gradient(n)
    if kind == "blobs":
        return gaussian_blobs(n, seed=seed)
    if kind == "scene":
        return composite_scene(n, seed=seed)
    raise ValueError(f"unknown synthetic image kind {kind!r} (choose from {KINDS})")

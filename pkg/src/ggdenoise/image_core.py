"""Square grayscale images: file I/O, noise injection, and the error metric.

Intensities are stored as float64 in [0, 255]; quantization to 8 bits
happens only when a file is written.  Color inputs are converted to gray
by the unweighted per-pixel mean of the three channels.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import ImageFormatError

INTENSITY_MAX = 255.0

_PNG_SIGNATURE = b"\x89PNG\r\n\x1a\n"


@dataclass(frozen=True)
class Image:
    """n-by-n grayscale image, real-valued intensities in [0, 255].

    Instances are immutable: the pixel array is copied on construction and
    marked read-only, so values are safe to share across workers.
    """

    data: np.ndarray

    def __post_init__(self):
        arr = np.asarray(self.data, dtype=np.float64)
        if arr.ndim != 2 or arr.shape[0] != arr.shape[1] or arr.shape[0] < 1:
            raise ValueError(f"image must be a square 2-D array, got shape {arr.shape}")
        if not np.all(np.isfinite(arr)):
            raise ValueError("image intensities must be finite")
        if arr.min() < 0.0 or arr.max() > INTENSITY_MAX:
            raise ValueError("image intensities must lie in [0, 255]")
        arr = arr.copy()
        arr.flags.writeable = False
        object.__setattr__(self, "data", arr)

    @property
    def n(self) -> int:
        """Side length in pixels."""
        return self.data.shape[0]


@dataclass(frozen=True)
class NoiseSpec:
    """Additive uniform noise: magnitude ``epsilon``, generator ``seed``.

    The generator is PCG64 seeded with ``seed``; per-pixel draws are taken
    in row-major order, so results are reproducible bit for bit.
    """

    epsilon: float
    seed: int = 0

    def __post_init__(self):
        if self.epsilon < 0:
            raise ValueError("epsilon must be nonnegative")


def load_image(path) -> Image:
    """Read a PGM (binary P5, maxval 255) or 8-bit PNG file as grayscale.

    RGB inputs are averaged across channels; non-square images are
    rejected.  Raises :class:`ImageFormatError` on unreadable files and
    unsupported formats.
    """
    path = Path(path)
    try:
        raw = path.read_bytes()
    except OSError as exc:
        raise ImageFormatError(f"cannot read {path}: {exc}") from exc
    if raw[:2] == b"P5":
        arr = _parse_pgm(raw, path)
    elif raw[:8] == _PNG_SIGNATURE:
        arr = _load_png(path)
    else:
        raise ImageFormatError(
            f"{path}: unsupported format (expected binary PGM 'P5' or PNG)"
        )
    if arr.shape[0] != arr.shape[1]:
        raise ImageFormatError(
            f"{path}: non-square image ({arr.shape[1]}x{arr.shape[0]})"
        )
    return Image(arr)


def save_image(image: Image, path) -> None:
    """Write as grayscale PGM (``.pgm``) or PNG (``.png``).

    Values are rounded half away from zero to the nearest integer, then
    clamped to [0, 255].
    """
    path = Path(path)
    pixels = quantize(image)
    suffix = path.suffix.lower()
    try:
        if suffix == ".pgm":
            header = f"P5\n{image.n} {image.n}\n255\n".encode("ascii")
            path.write_bytes(header + pixels.tobytes())
        elif suffix == ".png":
            from PIL import Image as PILImage

            PILImage.fromarray(pixels, mode="L").save(path)
        else:
            raise ImageFormatError(
                f"{path}: unsupported output format (use .pgm or .png)"
            )
    except OSError as exc:
        raise ImageFormatError(f"cannot write {path}: {exc}") from exc


def quantize(image: Image) -> np.ndarray:
    """8-bit view of an image: round half away from zero, clamp to [0, 255]."""
    rounded = np.floor(image.data + 0.5)  # data >= 0, so this is half-away-from-zero
    return np.clip(rounded, 0.0, INTENSITY_MAX).astype(np.uint8)


def add_uniform_noise(image: Image, spec: NoiseSpec) -> Image:
    """Perturb each pixel by ``epsilon * u`` with u ~ Uniform[-1, 1], then clamp.

    Deterministic for a fixed seed: one PCG64 stream, row-major draw order.
    """
    rng = np.random.Generator(np.random.PCG64(spec.seed))
    draws = rng.uniform(-1.0, 1.0, size=(image.n, image.n))
    noisy = image.data + spec.epsilon * draws
    return Image(np.clip(noisy, 0.0, INTENSITY_MAX))


def reconstruction_error(reference: Image, candidate: Image) -> float:
    """Normalized sum of squared differences between two images.

    sum((A - B)^2) / sqrt(sum(A^2) * sum(B^2)).  Symmetric in its
    arguments and exactly zero iff the images are identical.
    """
    if reference.n != candidate.n:
        raise ValueError(
            f"image sizes differ: {reference.n} vs {candidate.n}"
        )
    diff = reference.data - candidate.data
    numerator = float(np.sum(diff * diff))
    denominator = math.sqrt(
        float(np.sum(reference.data * reference.data))
        * float(np.sum(candidate.data * candidate.data))
    )
    if denominator == 0.0:
        raise ValueError("zero-norm image: error metric undefined")
    return numerator / denominator


def _parse_pgm(raw: bytes, path: Path) -> np.ndarray:
    pos = 0

    def next_token() -> bytes:
        nonlocal pos
        while pos < len(raw):
            c = raw[pos : pos + 1]
            if c == b"#":
                while pos < len(raw) and raw[pos : pos + 1] not in (b"\n", b"\r"):
                    pos += 1
            elif c.isspace():
                pos += 1
            else:
                break
        start = pos
        while pos < len(raw) and not raw[pos : pos + 1].isspace():
            pos += 1
        if start == pos:
            raise ImageFormatError(f"{path}: truncated PGM header")
        return raw[start:pos]

    magic = next_token()
    if magic != b"P5":
        raise ImageFormatError(f"{path}: unsupported PGM magic {magic!r}")
    try:
        width = int(next_token())
        height = int(next_token())
        maxval = int(next_token())
    except ValueError as exc:
        raise ImageFormatError(f"{path}: malformed PGM header") from exc
    if maxval != 255:
        raise ImageFormatError(f"{path}: unsupported PGM maxval {maxval} (need 255)")
    pos += 1  # single whitespace byte separating header from raster
    data = raw[pos : pos + width * height]
    if len(data) < width * height:
        raise ImageFormatError(f"{path}: truncated PGM pixel data")
    return (
        np.frombuffer(data, dtype=np.uint8)
        .reshape(height, width)
        .astype(np.float64)
    )


def _load_png(path: Path) -> np.ndarray:
    from PIL import Image as PILImage

    try:
        with PILImage.open(path) as img:
            img.load()
            mode = img.mode
            arr = np.asarray(img)
    except Exception as exc:  # Pillow raises a zoo of types here
        raise ImageFormatError(f"{path}: cannot decode PNG: {exc}") from exc
    if mode == "L":
        return arr.astype(np.float64)
    if mode == "RGB":
        return arr.astype(np.float64).mean(axis=2)
    raise ImageFormatError(
        f"{path}: unsupported PNG mode {mode!r} (need 8-bit grayscale or RGB)"
    )

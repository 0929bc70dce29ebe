"""Image ingestion and synthetic test patterns.

All images are float64 arrays in [0, 1], shaped (side, side) for grayscale
or (side, side, 3) for RGB, row-major with row 0 at the top.
"""

from __future__ import annotations

import numpy as np
from PIL import Image


def load_image(path, grayscale: bool = False) -> np.ndarray:
    """Load a PNG/PPM image, center-crop to square, scale to [0, 1]."""
    with Image.open(path) as img:
        if grayscale:
            img = img.convert("L")
        elif img.mode not in ("L", "RGB"):
            img = img.convert("RGB")
        arr = np.asarray(img, dtype=np.float64) / 255.0
    side = min(arr.shape[0], arr.shape[1])
    r0 = (arr.shape[0] - side) // 2
    c0 = (arr.shape[1] - side) // 2
    return np.ascontiguousarray(arr[r0 : r0 + side, c0 : c0 + side])


def save_image(path, image: np.ndarray) -> None:
    """Write a [0, 1] float image as 8-bit PNG/PPM (format from the suffix)."""
    arr = np.clip(np.asarray(image, dtype=np.float64), 0.0, 1.0)
    Image.fromarray(np.round(arr * 255.0).astype(np.uint8)).save(path)


def diagonal_stripes(side: int, period: float = 2.0, angle_deg: float = 45.0) -> np.ndarray:
    """Sinusoidal stripes at the given angle; period in pixels.

    The default is a fine 45-degree grating: detail along the diagonal is
    where an axis-aligned interpolation kernel is widest, so this pattern
    separates encodings by their diagonal resolving power.
    """
    if period <= 0:
        raise ValueError(f"period must be positive, got {period}")
    rows, cols = np.meshgrid(np.arange(side), np.arange(side), indexing="ij")
    theta = np.deg2rad(angle_deg)
    s = cols * np.cos(theta) + rows * np.sin(theta)
    return 0.5 + 0.5 * np.sin(2.0 * np.pi * s / period)


def radial_chirp(side: int, max_period: float = 64.0, min_period: float = 4.0) -> np.ndarray:
    """Concentric rings whose local period sweeps from max_period (center)
    down to min_period (corners); periods in pixels."""
    if not 0 < min_period <= max_period:
        raise ValueError("need 0 < min_period <= max_period")
    rows, cols = np.meshgrid(np.arange(side), np.arange(side), indexing="ij")
    c = (side - 1) / 2.0
    r = np.hypot(rows - c, cols - c)
    r_max = np.sqrt(2.0) * c + 1e-12
    # instantaneous frequency grows linearly with radius; phase is its integral
    f0, f1 = 1.0 / max_period, 1.0 / min_period
    phase = 2.0 * np.pi * (f0 * r + (f1 - f0) * r**2 / (2.0 * r_max))
    return 0.5 + 0.5 * np.cos(phase)


def checkerboard(side: int, cells: int = 16) -> np.ndarray:
    """Hard-edged checkerboard with ``cells`` squares per side."""
    if cells < 1:
        raise ValueError(f"cells must be >= 1, got {cells}")
    idx = np.arange(side) * cells // side
    rows, cols = np.meshgrid(idx, idx, indexing="ij")
    return ((rows + cols) % 2).astype(np.float64)


SYNTHETIC_IMAGES = {
    "stripes": diagonal_stripes,
    "chirp": radial_chirp,
    "checker": checkerboard,
}


def synthetic_image(name: str, side: int) -> np.ndarray:
    try:
        maker = SYNTHETIC_IMAGES[name]
    except KeyError:
        raise ValueError(f"unknown synthetic image {name!r}; expected one of {sorted(SYNTHETIC_IMAGES)}") from None
    return maker(side)

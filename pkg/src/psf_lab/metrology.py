"""Measuring point-spread behavior of trained fields.

A trained field is probed on a small dense window around its constraint
point (2D) or along rays (any dim); widths come from the first half-max
crossing walking outward from the peak, with linear interpolation between
samples. Nothing here knows how the field was trained: any callable
``points -> values`` works.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.ndimage import map_coordinates

from .kernels import LevelSchedule
from .training import FieldModel, field_fn

PEAK_EPS = 1e-9  # below this the peak is too weak to normalize against
SNR_FLOOR = 1e-12  # tail RMS below this reports infinite SNR


def _as_callable(field):
    if isinstance(field, FieldModel):
        return field_fn(field)
    if callable(field):
        return field
    raise TypeError(f"field must be a FieldModel or callable, got {type(field).__name__}")


@dataclass
class PSFMap:
    """Peak-normalized field samples on a dense axis-aligned window.

    ``values`` has shape (grid_points,) * dim, axis d indexed by ``axes[d]``;
    the window center sits exactly on the middle sample.
    """

    center: np.ndarray
    half_extent: float
    axes: list
    values: np.ndarray
    peak: float  # raw field value the map was normalized by

    @property
    def dim(self) -> int:
        return self.values.ndim

    @property
    def grid_points(self) -> int:
        return self.values.shape[0]

    @property
    def spacing(self) -> float:
        return float(self.axes[0][1] - self.axes[0][0])

    def radii(self) -> np.ndarray:
        """Distance of every sample from the window center, same shape as values."""
        offsets = np.meshgrid(*[ax - c for ax, c in zip(self.axes, self.center)], indexing="ij")
        return np.sqrt(sum(o**2 for o in offsets))


def sample_psf(field, center, half_extent: float, grid_points: int = 257, chunk: int = 65536) -> PSFMap:
    """Dense window around ``center``, normalized to 1 at the center sample."""
    fn = _as_callable(field)
    center = np.asarray(center, dtype=np.float64)
    if half_extent <= 0:
        raise ValueError(f"half_extent must be positive, got {half_extent}")
    if grid_points < 3 or grid_points % 2 == 0:
        raise ValueError(f"grid_points must be odd and >= 3, got {grid_points}")
    axes = [c + np.linspace(-half_extent, half_extent, grid_points) for c in center]
    mesh = np.meshgrid(*axes, indexing="ij")
    pts = np.stack([m.ravel() for m in mesh], axis=-1)
    vals = np.empty(pts.shape[0])
    for i in range(0, pts.shape[0], chunk):
        vals[i : i + chunk] = fn(pts[i : i + chunk])
    vals = vals.reshape([grid_points] * len(center))
    peak = float(vals[(grid_points // 2,) * len(center)])
    if abs(peak) < PEAK_EPS:
        raise ValueError(f"field value {peak:.3e} at the window center is too small to normalize")
    return PSFMap(center=center, half_extent=half_extent, axes=axes, values=vals / peak, peak=peak)


def sample_ray(field, center, direction, t_max: float, n: int = 129):
    """Field along ``center + t * direction`` for t in [0, t_max], normalized
    at t = 0. Returns (t, values)."""
    fn = _as_callable(field)
    center = np.asarray(center, dtype=np.float64)
    direction = np.asarray(direction, dtype=np.float64)
    direction = direction / np.linalg.norm(direction)
    if n < 2:
        raise ValueError(f"n must be >= 2, got {n}")
    t = np.linspace(0.0, t_max, n)
    vals = fn(center[None, :] + t[:, None] * direction[None, :])
    peak = float(vals[0])
    if abs(peak) < PEAK_EPS:
        raise ValueError(f"field value {peak:.3e} at the ray origin is too small to normalize")
    return t, vals / peak


def map_ray(psf_map: PSFMap, direction, step_scale: float = 0.5):
    """Linear-interpolated profile along a ray from the map center to the
    window boundary. Returns (t, values); step is step_scale * sample spacing."""
    direction = np.asarray(direction, dtype=np.float64)
    direction = direction / np.linalg.norm(direction)
    t_max = psf_map.half_extent / np.max(np.abs(direction))
    h = psf_map.spacing
    t = np.arange(0.0, t_max + 1e-12, h * step_scale)
    c_idx = (psf_map.grid_points - 1) / 2.0
    coords = c_idx + t[None, :] * direction[:, None] / h
    vals = map_coordinates(psf_map.values, coords, order=1, mode="nearest")
    return t, vals


def first_crossing(dist: np.ndarray, vals: np.ndarray, level: float) -> float:
    """Distance of the first downward crossing of ``level``, walking outward.

    ``dist`` must start at 0 with vals[0] above the level; the crossing is
    linearly interpolated between the bracketing samples.
    """
    if vals[0] < level:
        raise ValueError(f"profile starts at {vals[0]:.4f}, below the {level} level")
    below = np.nonzero(vals < level)[0]
    if below.size == 0:
        raise ValueError(f"no {level} crossing inside the sampled window")
    i = int(below[0])
    d0, d1 = dist[i - 1], dist[i]
    v0, v1 = vals[i - 1], vals[i]
    return float(d0 + (v0 - level) * (d1 - d0) / (v0 - v1))


def fwhm_along(psf_map: PSFMap, direction) -> float:
    """Full width at half max along a direction: twice the first outward
    half-max crossing distance from the center."""
    t, vals = map_ray(psf_map, np.asarray(direction, dtype=np.float64))
    return 2.0 * first_crossing(t, vals, 0.5)


def axis_fwhms(psf_map: PSFMap) -> np.ndarray:
    """FWHM along each coordinate axis."""
    return np.array([fwhm_along(psf_map, np.eye(psf_map.dim)[d]) for d in range(psf_map.dim)])


def crossings_by_angle(psf_map: PSFMap, level: float = 0.5, n_angles: int = 64):
    """First ``level`` crossing distance for a fan of directions (2D maps).

    Returns (angles_deg, distances); angles cover [0, 360) uniformly.
    """
    if psf_map.dim != 2:
        raise ValueError("angle fans are defined for 2D maps only")
    angles = np.arange(n_angles) * (360.0 / n_angles)
    dists = np.empty(n_angles)
    for i, a in enumerate(angles):
        rad = np.deg2rad(a)
        t, vals = map_ray(psf_map, np.array([np.cos(rad), np.sin(rad)]))
        dists[i] = first_crossing(t, vals, level)
    return angles, dists


def fwhm_fan(psf_map: PSFMap, n_angles: int = 64):
    """Full width at half max per fan direction (2 * one-sided crossing).

    Returns (angles_deg, widths).
    """
    angles, dists = crossings_by_angle(psf_map, level=0.5, n_angles=n_angles)
    return angles, 2.0 * dists


def anisotropy_ratio_at(psf_map: PSFMap, level: float = 0.5, n_angles: int = 64) -> float:
    """Max/min crossing distance at the given amplitude level over a fan.

    An isotropic map scores exactly 1. Note this is a ratio of distances;
    kernels.anisotropy_ratio predicts the ratio of squared distances, so
    the comparable model value is its square root.
    """
    _, dists = crossings_by_angle(psf_map, level=level, n_angles=n_angles)
    return float(dists.max() / dists.min())


def anisotropy_profile(psf_map: PSFMap, levels=(0.5,), n_angles: int = 64) -> dict:
    """anisotropy_ratio_at for several crossing levels, as {level: ratio}."""
    return {float(a): anisotropy_ratio_at(psf_map, level=a, n_angles=n_angles) for a in levels}


def broadening_factor(fwhm_values, schedule: LevelSchedule) -> float:
    """Measured width in units of the mean-resolution cell: n_avg * mean FWHM."""
    return float(schedule.n_avg * np.mean(np.asarray(fwhm_values, dtype=np.float64)))


def snr_db(psf_map: PSFMap, fwhm: float, guard: float = 3.0) -> float:
    """Peak-to-tail ratio in dB; the tail is everything beyond guard * fwhm.

    The map is peak-normalized, so this is 20 log10(1 / tail RMS); a clean
    (sub-floor) tail reports +inf.
    """
    mask = psf_map.radii() > guard * fwhm
    if not np.any(mask):
        raise ValueError(f"no samples beyond {guard} * fwhm = {guard * fwhm:.4f}; enlarge the window")
    rms = float(np.sqrt(np.mean(psf_map.values[mask] ** 2)))
    if rms < SNR_FLOOR:
        return float("inf")
    return float(20.0 * np.log10(1.0 / rms))


def write_psf_map_csv(psf_map: PSFMap, path) -> None:
    """Flatten a map to CSV: one row per sample, coordinates then value."""
    from .output import write_csv

    names = ["x", "y", "z"][: psf_map.dim]
    mesh = np.meshgrid(*psf_map.axes, indexing="ij")
    cols = [m.ravel() for m in mesh] + [psf_map.values.ravel()]
    rows = [tuple(float(c[i]) for c in cols) for i in range(cols[0].size)]
    write_csv(path, names + ["value"], rows)


def write_fwhm_by_angle_csv(angles, widths, path) -> None:
    from .output import write_csv

    rows = [(float(a), float(w)) for a, w in zip(angles, widths)]
    write_csv(path, ["angle_deg", "width"], rows)

import csv

import numpy as np
import pytest

from psf_lab.kernels import LevelSchedule
from psf_lab.metrology import (
    PSFMap,
    anisotropy_profile,
    anisotropy_ratio_at,
    axis_fwhms,
    broadening_factor,
    crossings_by_angle,
    first_crossing,
    fwhm_along,
    fwhm_fan,
    map_ray,
    sample_psf,
    sample_ray,
    snr_db,
    write_fwhm_by_angle_csv,
    write_psf_map_csv,
)

GAUSS_FWHM = 2.0 * np.sqrt(2.0 * np.log(2.0))  # in units of sigma


def gaussian2d(sx, sy, center=(0.5, 0.5)):
    cx, cy = center

    def field(pts):
        pts = np.atleast_2d(np.asarray(pts, dtype=np.float64))
        return np.exp(-0.5 * (((pts[:, 0] - cx) / sx) ** 2 + ((pts[:, 1] - cy) / sy) ** 2))

    return field


# ---------------------------------------------------------------------------
# sampling
# ---------------------------------------------------------------------------


def test_sample_psf_window_layout():
    m = sample_psf(gaussian2d(0.05, 0.05), (0.5, 0.5), 0.2, grid_points=65)
    assert m.values.shape == (65, 65)
    assert m.values[32, 32] == 1.0
    assert m.peak == pytest.approx(1.0)
    assert m.spacing == pytest.approx(0.4 / 64)
    assert m.axes[0][0] == pytest.approx(0.3)
    assert m.axes[1][-1] == pytest.approx(0.7)
    assert m.dim == 2 and m.grid_points == 65


def test_sample_psf_normalizes_by_center():
    def field(pts):
        pts = np.atleast_2d(pts)
        return np.full(pts.shape[0], 0.25)

    m = sample_psf(field, (0.5, 0.5), 0.1, grid_points=17)
    assert m.peak == pytest.approx(0.25)
    assert np.allclose(m.values, 1.0)


def test_sample_psf_validation():
    f = gaussian2d(0.05, 0.05)
    with pytest.raises(ValueError):
        sample_psf(f, (0.5, 0.5), 0.0)
    with pytest.raises(ValueError):
        sample_psf(f, (0.5, 0.5), 0.1, grid_points=64)
    with pytest.raises(ValueError, match="too small"):
        sample_psf(lambda p: np.zeros(np.atleast_2d(p).shape[0]), (0.5, 0.5), 0.1)
    with pytest.raises(TypeError):
        sample_psf("not a field", (0.5, 0.5), 0.1)


def test_radii_geometry():
    m = sample_psf(gaussian2d(0.05, 0.05), (0.5, 0.5), 0.2, grid_points=33)
    r = m.radii()
    assert r[16, 16] == 0.0
    assert r[0, 0] == pytest.approx(0.2 * np.sqrt(2.0))
    assert r[16, 0] == pytest.approx(0.2)


def test_sample_ray_profile():
    t, vals = sample_ray(gaussian2d(0.05, 0.05), (0.5, 0.5), (1.0, 0.0), 0.2, n=81)
    assert t[0] == 0.0 and t[-1] == pytest.approx(0.2)
    assert vals[0] == 1.0
    assert np.allclose(vals, np.exp(-0.5 * (t / 0.05) ** 2), atol=1e-12)
    # direction length must not matter
    _, vals2 = sample_ray(gaussian2d(0.05, 0.05), (0.5, 0.5), (7.0, 0.0), 0.2, n=81)
    assert np.allclose(vals, vals2)
    with pytest.raises(ValueError):
        sample_ray(gaussian2d(0.05, 0.05), (0.5, 0.5), (1.0, 0.0), 0.2, n=1)


# ---------------------------------------------------------------------------
# crossings and widths
# ---------------------------------------------------------------------------


def test_first_crossing_interpolates():
    dist = np.array([0.0, 1.0, 2.0])
    vals = np.array([1.0, 0.6, 0.4])
    assert first_crossing(dist, vals, 0.5) == pytest.approx(1.5)


def test_first_crossing_takes_first_of_many():
    dist = np.linspace(0, 4, 5)
    vals = np.array([1.0, 0.4, 0.8, 0.4, 0.2])
    assert first_crossing(dist, vals, 0.5) == pytest.approx(0.0 + 0.5 / 0.6)


def test_first_crossing_validation():
    with pytest.raises(ValueError, match="below"):
        first_crossing(np.array([0.0, 1.0]), np.array([0.3, 0.2]), 0.5)
    with pytest.raises(ValueError, match="no 0.5 crossing"):
        first_crossing(np.array([0.0, 1.0]), np.array([1.0, 0.9]), 0.5)


def test_fwhm_matches_analytic_gaussian():
    m = sample_psf(gaussian2d(0.05, 0.05), (0.5, 0.5), 0.2, grid_points=257)
    expected = GAUSS_FWHM * 0.05
    assert fwhm_along(m, (1.0, 0.0)) == pytest.approx(expected, rel=1e-3)
    assert fwhm_along(m, (1.0, 1.0)) == pytest.approx(expected, rel=1e-3)
    assert axis_fwhms(m) == pytest.approx([expected, expected], rel=1e-3)


def test_anisotropic_gaussian_ratio():
    m = sample_psf(gaussian2d(0.04, 0.08), (0.5, 0.5), 0.3, grid_points=257)
    fx, fy = axis_fwhms(m)
    assert fx == pytest.approx(GAUSS_FWHM * 0.04, rel=1e-3)
    assert fy == pytest.approx(GAUSS_FWHM * 0.08, rel=1e-3)
    assert anisotropy_ratio_at(m, 0.5) == pytest.approx(2.0, rel=2e-2)
    prof = anisotropy_profile(m, levels=(0.5, 0.25))
    assert set(prof) == {0.5, 0.25}
    assert prof[0.25] == pytest.approx(2.0, rel=2e-2)


def test_fan_reflection_symmetry():
    m = sample_psf(gaussian2d(0.04, 0.08), (0.5, 0.5), 0.3, grid_points=129)
    angles, dists = crossings_by_angle(m, n_angles=8)
    lookup = dict(zip(angles, dists))
    assert lookup[0.0] == pytest.approx(lookup[180.0], rel=1e-6)
    assert lookup[90.0] == pytest.approx(lookup[270.0], rel=1e-6)
    assert lookup[45.0] == pytest.approx(lookup[135.0], rel=1e-6)


def test_fwhm_fan_doubles_crossings():
    m = sample_psf(gaussian2d(0.05, 0.05), (0.5, 0.5), 0.2, grid_points=129)
    angles, widths = fwhm_fan(m, n_angles=16)
    _, dists = crossings_by_angle(m, n_angles=16)
    assert np.allclose(widths, 2.0 * dists)
    assert len(angles) == 16 and angles[1] == pytest.approx(22.5)


def test_map_ray_tracks_direct_samples():
    f = gaussian2d(0.06, 0.06)
    m = sample_psf(f, (0.5, 0.5), 0.2, grid_points=257)
    t, vals = map_ray(m, (1.0, 2.0))
    direct = f(np.array([0.5, 0.5]) + t[:, None] * (np.array([1.0, 2.0]) / np.sqrt(5.0)))
    assert np.abs(vals - direct).max() < 1e-3


def test_crossings_require_2d():
    def field3(pts):
        pts = np.atleast_2d(pts)
        return np.exp(-0.5 * np.sum(((pts - 0.5) / 0.05) ** 2, axis=1))

    m = sample_psf(field3, (0.5, 0.5, 0.5), 0.15, grid_points=33)
    with pytest.raises(ValueError):
        crossings_by_angle(m)
    expected = GAUSS_FWHM * 0.05
    assert axis_fwhms(m) == pytest.approx([expected] * 3, rel=5e-3)


# ---------------------------------------------------------------------------
# tail SNR and broadening
# ---------------------------------------------------------------------------


def _flat_tail_map(tail_value: float, grid_points: int = 65) -> PSFMap:
    values = np.full((grid_points, grid_points), tail_value)
    values[grid_points // 2, grid_points // 2] = 1.0
    axes = [0.5 + np.linspace(-0.2, 0.2, grid_points) for _ in range(2)]
    return PSFMap(center=np.array([0.5, 0.5]), half_extent=0.2, axes=axes, values=values, peak=1.0)


def test_snr_db_known_tail():
    m = _flat_tail_map(0.01)
    assert snr_db(m, fwhm=0.02, guard=3.0) == pytest.approx(40.0)
    assert snr_db(_flat_tail_map(0.1), fwhm=0.02) == pytest.approx(20.0)


def test_snr_db_clean_tail_is_infinite():
    assert snr_db(_flat_tail_map(0.0), fwhm=0.02) == np.inf


def test_snr_db_requires_tail_samples():
    with pytest.raises(ValueError, match="enlarge the window"):
        snr_db(_flat_tail_map(0.01), fwhm=0.2, guard=3.0)


def test_broadening_factor_units():
    sched = LevelSchedule(2, 4.0, 2.0)
    assert sched.n_avg == pytest.approx(6.0)
    assert broadening_factor([1.0 / 6.0], sched) == pytest.approx(1.0)
    assert broadening_factor([0.5, 1.5], sched) == pytest.approx(6.0)


# ---------------------------------------------------------------------------
# CSV emission
# ---------------------------------------------------------------------------


def test_write_psf_map_csv(tmp_path):
    m = sample_psf(gaussian2d(0.05, 0.05), (0.5, 0.5), 0.1, grid_points=9)
    path = tmp_path / "map.csv"
    write_psf_map_csv(m, path)
    with open(path, newline="") as f:
        rows = list(csv.reader(f))
    assert rows[0] == ["x", "y", "value"]
    assert len(rows) == 1 + 81
    x, y, v = (float(c) for c in rows[1])
    assert (x, y) == (m.axes[0][0], m.axes[1][0])
    assert v == pytest.approx(m.values[0, 0])


def test_write_fwhm_by_angle_csv(tmp_path):
    path = tmp_path / "fan.csv"
    write_fwhm_by_angle_csv([0.0, 90.0], [0.1, 0.2], path)
    with open(path, newline="") as f:
        rows = list(csv.reader(f))
    assert rows[0] == ["angle_deg", "width"]
    assert [float(rows[1][0]), float(rows[1][1])] == [0.0, 0.1]
    assert len(rows) == 3

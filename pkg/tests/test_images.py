import numpy as np
import pytest

from psf_lab.images import (
    checkerboard,
    diagonal_stripes,
    load_image,
    radial_chirp,
    save_image,
    synthetic_image,
)


def test_diagonal_stripes_geometry():
    # period 4 sqrt(2) along the normal makes the per-axis wavelength exactly 8
    img = diagonal_stripes(64, period=4.0 * np.sqrt(2.0), angle_deg=45.0)
    assert img.shape == (64, 64)
    assert img.min() >= 0.0 and img.max() <= 1.0
    # constant along the stripe direction: stepping (+1, -1) keeps the phase
    assert np.allclose(img[1:, :-1], img[:-1, 1:])
    assert np.allclose(img[:, 8:], img[:, :-8])
    assert np.allclose(img[8:, :], img[:-8, :])


def test_diagonal_stripes_validation():
    with pytest.raises(ValueError):
        diagonal_stripes(32, period=0.0)


def test_radial_chirp_ring_structure():
    img = radial_chirp(65)
    assert img.shape == (65, 65)
    assert img.min() >= 0.0 and img.max() <= 1.0
    assert img[32, 32] == pytest.approx(1.0)  # cos(0) at the center
    # radially symmetric: the four axis-neighbors at equal radius agree
    assert img[32, 40] == pytest.approx(img[40, 32])
    assert img[32, 24] == pytest.approx(img[24, 32])
    with pytest.raises(ValueError):
        radial_chirp(64, max_period=4.0, min_period=8.0)


def test_checkerboard_cells():
    img = checkerboard(64, cells=8)
    assert set(np.unique(img)) == {0.0, 1.0}
    assert img[0, 0] == 0.0
    assert img[0, 8] == 1.0  # next cell flips
    assert np.all(img[:8, :8] == 0.0)
    with pytest.raises(ValueError):
        checkerboard(64, cells=0)


def test_synthetic_image_registry():
    assert np.array_equal(synthetic_image("stripes", 32), diagonal_stripes(32))
    assert np.array_equal(synthetic_image("chirp", 32), radial_chirp(32))
    assert np.array_equal(synthetic_image("checker", 32), checkerboard(32))
    with pytest.raises(ValueError, match="unknown synthetic image"):
        synthetic_image("noise", 32)


def test_save_load_round_trip_grayscale(tmp_path):
    img = diagonal_stripes(32)
    path = tmp_path / "img.png"
    save_image(path, img)
    back = load_image(path, grayscale=True)
    assert back.shape == (32, 32)
    # 8-bit quantization bounds the round-trip error
    assert np.abs(back - img).max() <= 0.5 / 255.0 + 1e-12


def test_save_load_round_trip_rgb(tmp_path):
    rng = np.random.default_rng(0)
    img = rng.uniform(size=(16, 16, 3))
    path = tmp_path / "img.png"
    save_image(path, img)
    back = load_image(path)
    assert back.shape == (16, 16, 3)
    assert np.abs(back - img).max() <= 0.5 / 255.0 + 1e-12


def test_load_image_center_crops(tmp_path):
    img = np.zeros((16, 24))
    img[:, 4:20] = np.linspace(0, 1, 16)[None, :]
    path = tmp_path / "wide.png"
    save_image(path, img)
    back = load_image(path, grayscale=True)
    assert back.shape == (16, 16)
    expected = np.round(np.linspace(0, 1, 16) * 255) / 255.0
    assert np.allclose(back[0], expected, atol=1e-12)


def test_save_image_clips(tmp_path):
    path = tmp_path / "clip.png"
    save_image(path, np.array([[1.7, -0.5], [0.5, 0.25]]))
    back = load_image(path, grayscale=True)
    assert back[0, 0] == 1.0
    assert back[0, 1] == 0.0

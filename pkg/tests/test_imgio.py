import numpy as np
import pytest

from lutsr.imgio import (
    add_gaussian_noise,
    bicubic_downsample,
    load_image,
    rgb_to_y,
    save_image,
)


def test_png_round_trip_rgb(tmp_path):
    rng = np.random.default_rng(0)
    img = rng.integers(0, 256, (16, 16, 3)).astype(np.uint8)
    path = tmp_path / "a.png"
    save_image(img, path)
    assert np.array_equal(load_image(path), img)


def test_png_round_trip_grayscale_and_1x1(tmp_path):
    img = np.array([[173]], dtype=np.uint8)
    path = tmp_path / "one.png"
    save_image(img, path)
    back = load_image(path)
    assert back.shape == (1, 1) and back[0, 0] == 173


def test_png_mode_preserved(tmp_path):
    gray = np.random.default_rng(1).integers(0, 256, (8, 8)).astype(np.uint8)
    rgb = np.random.default_rng(2).integers(0, 256, (8, 8, 3)).astype(np.uint8)
    save_image(gray, tmp_path / "g.png")
    save_image(rgb, tmp_path / "c.png")
    assert load_image(tmp_path / "g.png").ndim == 2
    assert load_image(tmp_path / "c.png").ndim == 3


def test_load_rejects_unsupported_depth(tmp_path):
    from PIL import Image

    path = tmp_path / "deep.png"
    Image.new("I;16", (4, 4)).save(path)
    with pytest.raises(ValueError):
        load_image(path)


def test_save_rejects_non_uint8(tmp_path):
    with pytest.raises(ValueError):
        save_image(np.zeros((4, 4), np.float64), tmp_path / "f.png")


def test_rgb_to_y_white_and_red():
    white = np.full((1, 1, 3), 255, np.uint8)
    assert rgb_to_y(white)[0, 0] == 255
    red = np.zeros((1, 1, 3), np.uint8)
    red[..., 0] = 255
    assert rgb_to_y(red)[0, 0] == 76  # round(76.245)


def test_rgb_to_y_gray_exhaustive():
    g = np.arange(256, dtype=np.uint8)
    rgb = np.repeat(g[None, :, None], 3, axis=2)
    assert np.array_equal(rgb_to_y(rgb), g[None, :])


def test_rgb_to_y_bounded():
    rng = np.random.default_rng(3)
    img = rng.integers(0, 256, (32, 32, 3)).astype(np.uint8)
    y = rgb_to_y(img)
    assert y.min() >= 0 and y.max() <= 255


def test_bicubic_constant_stays_constant():
    for r in (1, 2, 3, 4):
        img = np.full((12, 12), 201, np.uint8)
        out = bicubic_downsample(img, r)
        assert np.all(out == 201)
        assert out.shape == (12 // r, 12 // r)


def test_bicubic_identity_factor_one():
    img = np.random.default_rng(4).integers(0, 256, (7, 5)).astype(np.uint8)
    assert np.array_equal(bicubic_downsample(img, 1), img)


def test_bicubic_rejects_non_divisible():
    with pytest.raises(ValueError):
        bicubic_downsample(np.zeros((9, 8), np.uint8), 2)


def _bicubic_oracle(img, factor):
    """Direct double-loop kernel evaluation, same convention."""

    def cubic(x, a=-0.5):
        x = abs(x)
        if x <= 1:
            return (a + 2) * x**3 - (a + 3) * x**2 + 1
        if x < 2:
            return a * x**3 - 5 * a * x**2 + 8 * a * x - 4 * a
        return 0.0

    src = img.astype(np.float64)
    h, w = src.shape
    oh, ow = h // factor, w // factor
    out = np.zeros((oh, ow))
    for oy in range(oh):
        for ox in range(ow):
            cy = (oy + 0.5) * factor - 0.5
            cx = (ox + 0.5) * factor - 0.5
            total = 0.0
            wsum = 0.0
            for ty in range(int(np.ceil(cy - 2 * factor)), int(np.floor(cy + 2 * factor)) + 1):
                wy = cubic((ty - cy) / factor)
                for tx in range(int(np.ceil(cx - 2 * factor)), int(np.floor(cx + 2 * factor)) + 1):
                    wx = cubic((tx - cx) / factor)
                    sy = min(max(ty, 0), h - 1)
                    sx = min(max(tx, 0), w - 1)
                    total += wy * wx * src[sy, sx]
                    wsum += wy * wx
            out[oy, ox] = total / wsum
    return np.clip(np.floor(np.abs(out) + 0.5) * np.sign(out), 0, 255).astype(np.uint8)


def test_bicubic_matches_double_loop_oracle():
    ramp = (np.arange(64).reshape(8, 8) * 4 % 256).astype(np.uint8)
    assert np.array_equal(bicubic_downsample(ramp, 4), _bicubic_oracle(ramp, 4))
    rng = np.random.default_rng(5)
    img = rng.integers(0, 256, (12, 8)).astype(np.uint8)
    assert np.array_equal(bicubic_downsample(img, 2), _bicubic_oracle(img, 2))


def test_noise_sigma_zero_is_identity():
    img = np.random.default_rng(6).integers(0, 256, (8, 8)).astype(np.uint8)
    assert np.array_equal(add_gaussian_noise(img, 0, 1), img)


def test_noise_deterministic_per_seed():
    img = np.full((32, 32), 100, np.uint8)
    a = add_gaussian_noise(img, 10, 42)
    b = add_gaussian_noise(img, 10, 42)
    c = add_gaussian_noise(img, 10, 43)
    assert np.array_equal(a, b)
    assert not np.array_equal(a, c)


def test_noise_empirical_std():
    img = np.full((256, 256), 128, np.uint8)
    noisy = add_gaussian_noise(img, 15, 7)
    std = float((noisy.astype(np.float64) - 128).std())
    assert abs(std - 15) / 15 < 0.03  # clipping negligible at mid-gray

import math

import numpy as np
import pytest

from lutsr.metrics import (
    PSNR_INF,
    blocking_effect_factor,
    psnr_b,
    psnr_y,
    receptive_field,
    ssim,
    storage_report,
)
from lutsr.model import make_descriptor
from lutsr.refnet import make_reference_net
from lutsr.sampling import subsample_table, uniform_compress
from lutsr.transfer import transfer_model


def test_psnr_identical_is_sentinel():
    img = np.random.default_rng(0).integers(0, 256, (8, 8)).astype(np.uint8)
    assert psnr_y(img, img) is PSNR_INF
    assert math.isinf(psnr_y(img, img))


def test_psnr_uniform_difference_closed_form():
    a = np.random.default_rng(1).integers(0, 255, (16, 16)).astype(np.uint8)
    b = (a + 1).astype(np.uint8)
    assert psnr_y(a, b) == pytest.approx(20 * math.log10(255), abs=1e-9)


def test_psnr_matches_independent_mse():
    rng = np.random.default_rng(2)
    a = rng.integers(0, 256, (12, 9)).astype(np.uint8)
    b = rng.integers(0, 256, (12, 9)).astype(np.uint8)
    mse = 0.0
    for y in range(12):
        for x in range(9):
            mse += (float(a[y, x]) - float(b[y, x])) ** 2
    mse /= a.size
    assert psnr_y(a, b) == pytest.approx(10 * math.log10(255**2 / mse), abs=1e-9)


def test_psnr_symmetric_and_shape_checked():
    rng = np.random.default_rng(3)
    a = rng.integers(0, 256, (8, 8)).astype(np.uint8)
    b = rng.integers(0, 256, (8, 8)).astype(np.uint8)
    assert psnr_y(a, b) == psnr_y(b, a)
    with pytest.raises(ValueError):
        psnr_y(a, b[:4])


def test_psnr_rgb_uses_luma():
    rgb = np.zeros((8, 8, 3), np.uint8)
    rgb[..., 0] = 255
    gray = np.full((8, 8), 0.299 * 255.0)  # float luma, unrounded
    assert psnr_y(rgb, gray) == PSNR_INF


def test_ssim_self_is_exactly_one():
    for seed in range(3):
        a = np.random.default_rng(seed).integers(0, 256, (14, 17)).astype(np.uint8)
        assert ssim(a, a) == 1.0


def test_ssim_rejects_small_images():
    with pytest.raises(ValueError):
        ssim(np.zeros((10, 32), np.uint8), np.zeros((10, 32), np.uint8))


def test_ssim_negative_for_negated_structure():
    # negation around the shared mean flips the covariance sign
    rng = np.random.default_rng(4)
    a = (128 + rng.integers(-80, 81, (16, 16))).astype(np.uint8)
    b = (2 * 128 - a.astype(int)).astype(np.uint8)
    assert ssim(a, b) < 0


def _ssim_windowed_oracle(a, b):
    a = a.astype(np.float64)
    b = b.astype(np.float64)
    half = 5.0
    g = np.exp(-((np.arange(11) - half) ** 2) / (2 * 1.5**2))
    win = np.outer(g, g)
    win /= win.sum()
    c1 = (0.01 * 255) ** 2
    c2 = (0.03 * 255) ** 2
    h, w = a.shape
    vals = []
    for y in range(h - 10):
        for x in range(w - 10):
            wa = a[y : y + 11, x : x + 11]
            wb = b[y : y + 11, x : x + 11]
            mu_a = (win * wa).sum()
            mu_b = (win * wb).sum()
            va = (win * wa * wa).sum() - mu_a**2
            vb = (win * wb * wb).sum() - mu_b**2
            cov = (win * wa * wb).sum() - mu_a * mu_b
            vals.append(
                ((2 * mu_a * mu_b + c1) * (2 * cov + c2))
                / ((mu_a**2 + mu_b**2 + c1) * (va + vb + c2))
            )
    return float(np.mean(vals))


def test_ssim_matches_windowed_oracle():
    rng = np.random.default_rng(5)
    a = rng.integers(0, 256, (16, 16)).astype(np.uint8)
    b = rng.integers(0, 256, (16, 16)).astype(np.uint8)
    assert ssim(a, b) == pytest.approx(_ssim_windowed_oracle(a, b), abs=1e-6)


def _bef_oracle(img, block=8):
    """Literal boundary-vs-interior squared-difference accounting."""
    y = img.astype(np.float64)
    h, w = y.shape
    sb = sc = 0.0
    nb = nc = 0
    for r in range(h):
        for c in range(w - 1):
            d = (y[r, c] - y[r, c + 1]) ** 2
            if (c + 1) % block == 0:
                sb += d
                nb += 1
            else:
                sc += d
                nc += 1
    for r in range(h - 1):
        for c in range(w):
            d = (y[r, c] - y[r + 1, c]) ** 2
            if (r + 1) % block == 0:
                sb += d
                nb += 1
            else:
                sc += d
                nc += 1
    if nb == 0 or nc == 0:
        return 0.0
    d_b, d_c = sb / nb, sc / nc
    if d_b <= d_c:
        return 0.0
    return math.log2(block) / math.log2(min(h, w)) * (d_b - d_c)


def _psnr_b_oracle(a, b):
    mse = float(np.mean((a.astype(np.float64) - b.astype(np.float64)) ** 2))
    return 10 * math.log10(255**2 / (mse + _bef_oracle(b)))


def test_psnr_b_identical_sentinel():
    img = np.random.default_rng(6).integers(0, 256, (16, 16)).astype(np.uint8)
    assert psnr_b(img, img) is PSNR_INF


def test_psnr_b_constant_distorted_equals_psnr():
    ref = np.random.default_rng(7).integers(0, 256, (16, 16)).astype(np.uint8)
    const = np.full((16, 16), 90, np.uint8)
    assert blocking_effect_factor(const) == 0.0
    assert psnr_b(ref, const) == psnr_y(ref, const)


def _blocky(seed, shape=(16, 16)):
    rng = np.random.default_rng(seed)
    img = np.zeros(shape)
    for by in range(0, shape[0], 8):
        for bx in range(0, shape[1], 8):
            img[by : by + 8, bx : bx + 8] = rng.integers(30, 220)
    return (img + rng.normal(0, 3, shape)).clip(0, 255).astype(np.uint8)


def test_psnr_b_matches_bef_oracle_on_blocky_images():
    rng = np.random.default_rng(8)
    for seed in range(20):
        smooth = rng.integers(0, 256, (16, 16)).astype(np.uint8)
        blocky = _blocky(seed)
        assert psnr_b(smooth, blocky) == pytest.approx(
            _psnr_b_oracle(smooth, blocky), abs=1e-6
        )


def test_psnr_b_is_asymmetric():
    smooth = np.tile(np.arange(16, dtype=np.uint8) * 8, (16, 1))
    blocky = _blocky(99)
    assert psnr_b(smooth, blocky) != psnr_b(blocky, smooth)


def test_receptive_field_table_values():
    assert receptive_field(make_descriptor("S")) == (9, 9)
    assert receptive_field(make_descriptor("M")) == (17, 17)
    assert receptive_field(make_descriptor("L")) == (65, 65)


def test_receptive_field_affine_in_blocks():
    from lutsr.model import ModelDescriptor

    sides = [
        receptive_field(ModelDescriptor(variant="custom", n_blocks=n, channels=2))[0]
        for n in range(5)
    ]
    assert all(b - a == 8 for a, b in zip(sides, sides[1:]))


def test_storage_single_table_accounting():
    net = make_reference_net(make_descriptor("S", channels=2, scale=1), seed=0,
                             identity=True)
    pack = transfer_model(net)
    rep = storage_report(pack)
    six_bit = [t for t in rep["tables"] if t["in_bits"] == 6]
    assert all(t["entry_count"] == 64 for t in six_bit)
    assert rep["entry_bytes_total"] == sum(t["entry_count"] for t in rep["tables"])


def test_storage_stride4_entry_count():
    from lutsr.model import Lut1D

    t = Lut1D("pointwise", 0, 0, 0, 6, 1, np.arange(64, dtype=np.int8))
    assert subsample_table(t, 4).entries.shape == (17,)  # 64/4 + 1


def test_storage_uniform_stride2_halving_pattern():
    net = make_reference_net(make_descriptor("M", channels=4, scale=2), seed=1)
    pack = transfer_model(net)
    rep = storage_report(pack)
    rep2 = storage_report(uniform_compress(pack, 2))
    assert rep2["entry_bytes_total"] == rep["entry_bytes_total"] // 2 + rep["table_count"]
    assert rep2["compression_ratio"] == pytest.approx(
        rep2["entry_bytes_total"] / rep["entry_bytes_total"]
    )


def test_storage_matches_file_size():
    from lutsr.packfile import header_size, serialize

    net = make_reference_net(make_descriptor("M", channels=3, scale=2), seed=2)
    pack = transfer_model(net)
    rep = storage_report(pack)
    blob = serialize(pack)
    assert rep["table_bytes_total"] == len(blob) - header_size(pack.descriptor)

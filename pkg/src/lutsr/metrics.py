"""Quality metrics (PSNR on Y, SSIM, PSNR-B), receptive-field arithmetic and
storage accounting.

Luma convention: full-range BT.601 (the eval report states this, since SR
codebases disagree and absolute metric values are convention-sensitive).
"""

from __future__ import annotations

import math

import numpy as np

from .model import LutPack, ModelDescriptor, stride1_entry_count

PSNR_INF = math.inf

# side = 2*reach + 1, reach = 4 + 4*n_blocks: each Shift-Block adds 2 pixels of
# one-sided reach from its depthwise 3x3 under the rotation ensemble plus 2
# from the |offset| <= 2 channel shift.
_BASE_REACH = 4
_BLOCK_REACH = 4

# Serialized per-table header: role(1) position(1) in_ch(2) out_ch(2)
# in_bits(1) stride(1) entry_count(4).
TABLE_HEADER_BYTES = 12


def _to_luma(img) -> np.ndarray:
    arr = np.asarray(img, dtype=np.float64)
    if arr.ndim == 3 and arr.shape[2] == 3:
        return 0.299 * arr[..., 0] + 0.587 * arr[..., 1] + 0.114 * arr[..., 2]
    if arr.ndim == 2:
        return arr
    raise ValueError(f"expected (H, W) or (H, W, 3) image, got shape {arr.shape}")


def psnr_y(a, b) -> float:
    """Peak signal-to-noise ratio in dB over float luma; +inf for identical
    inputs (rendered as a sentinel, never a large finite number)."""
    ya, yb = _to_luma(a), _to_luma(b)
    if ya.shape != yb.shape:
        raise ValueError(f"dimension mismatch: {ya.shape} vs {yb.shape}")
    mse = float(np.mean((ya - yb) ** 2))
    if mse == 0.0:
        return PSNR_INF
    return 10.0 * math.log10(255.0**2 / mse)


def _gaussian_window(size: int = 11, sigma: float = 1.5) -> np.ndarray:
    half = (size - 1) / 2.0
    g = np.exp(-((np.arange(size) - half) ** 2) / (2.0 * sigma**2))
    win = np.outer(g, g)
    return win / win.sum()


def _window_stats(y: np.ndarray, win: np.ndarray) -> np.ndarray:
    """Gaussian-weighted local means over all valid window placements."""
    k = win.shape[0]
    views = np.lib.stride_tricks.sliding_window_view(y, (k, k))
    return np.tensordot(views, win, axes=([2, 3], [0, 1]))


def ssim(a, b) -> float:
    """Single-scale SSIM on luma: 11x11 Gaussian window sigma=1.5, K1=0.01,
    K2=0.03, L=255, mean over valid windows."""
    ya, yb = _to_luma(a), _to_luma(b)
    if ya.shape != yb.shape:
        raise ValueError(f"dimension mismatch: {ya.shape} vs {yb.shape}")
    if min(ya.shape) < 11:
        raise ValueError("SSIM needs both sides >= 11 pixels")
    win = _gaussian_window()
    mu_a = _window_stats(ya, win)
    mu_b = _window_stats(yb, win)
    var_a = _window_stats(ya * ya, win) - mu_a * mu_a
    var_b = _window_stats(yb * yb, win) - mu_b * mu_b
    cov = _window_stats(ya * yb, win) - mu_a * mu_b
    c1 = (0.01 * 255.0) ** 2
    c2 = (0.03 * 255.0) ** 2
    num = (2.0 * mu_a * mu_b + c1) * (2.0 * cov + c2)
    den = (mu_a * mu_a + mu_b * mu_b + c1) * (var_a + var_b + c2)
    return float(np.mean(num / den))


def blocking_effect_factor(img, block: int = 8) -> float:
    """Yim-Bovik BEF: excess squared difference across block-aligned boundaries
    relative to interior neighbor pairs, log-weighted by block size."""
    y = _to_luma(img)
    h, w = y.shape
    dh = (y[:, :-1] - y[:, 1:]) ** 2  # horizontal neighbor pairs, (h, w-1)
    dv = (y[:-1, :] - y[1:, :]) ** 2  # vertical neighbor pairs, (h-1, w)
    hb = np.arange(block - 1, w - 1, block)  # left column of boundary pairs
    vb = np.arange(block - 1, h - 1, block)
    hmask = np.zeros(w - 1, dtype=bool)
    hmask[hb] = True
    vmask = np.zeros(h - 1, dtype=bool)
    vmask[vb] = True
    n_b = h * hb.size + w * vb.size
    n_c = dh.size + dv.size - n_b
    if n_b == 0 or n_c == 0:
        return 0.0
    d_b = (dh[:, hmask].sum() + dv[vmask, :].sum()) / n_b
    d_c = (dh[:, ~hmask].sum() + dv[~vmask, :].sum()) / n_c
    if d_b <= d_c:
        return 0.0
    eta = math.log2(block) / math.log2(min(h, w))
    return float(eta * (d_b - d_c))


def psnr_b(a, b, block: int = 8) -> float:
    """PSNR with the MSE augmented by the blocking effect factor of the
    distorted image b. Identical inputs return the infinity sentinel."""
    ya, yb = _to_luma(a), _to_luma(b)
    if ya.shape != yb.shape:
        raise ValueError(f"dimension mismatch: {ya.shape} vs {yb.shape}")
    if np.array_equal(ya, yb):
        return PSNR_INF
    mse = float(np.mean((ya - yb) ** 2))
    mse_b = mse + blocking_effect_factor(b, block)
    if mse_b == 0.0:
        return PSNR_INF
    return 10.0 * math.log10(255.0**2 / mse_b)


def receptive_field(descriptor: ModelDescriptor) -> tuple:
    reach = _BASE_REACH + descriptor.n_blocks * _BLOCK_REACH
    side = 2 * reach + 1
    return (side, side)


def storage_report(pack: LutPack) -> dict:
    """Byte accounting per table and pack-wide, against the stride-1 baseline.

    table_bytes_total matches the serialized file size minus the preamble
    (magic, version, descriptor block, table count) byte-exactly.
    """
    per_table = []
    entry_total = 0
    stride1_total = 0
    for t in pack.tables:
        n = int(t.entries.shape[0])
        per_table.append(
            {
                "role": t.role,
                "position": t.position,
                "in_channel": t.in_channel,
                "out_channel": t.out_channel,
                "in_bits": t.in_bits,
                "stride": t.stride,
                "entry_count": n,
                "bytes": n + TABLE_HEADER_BYTES,
            }
        )
        entry_total += n
        stride1_total += stride1_entry_count(t.in_bits)
    return {
        "tables": per_table,
        "table_count": len(pack.tables),
        "entry_bytes_total": entry_total,
        "table_header_bytes": TABLE_HEADER_BYTES * len(pack.tables),
        "table_bytes_total": entry_total + TABLE_HEADER_BYTES * len(pack.tables),
        "stride1_entry_bytes": stride1_total,
        "compression_ratio": entry_total / stride1_total if stride1_total else 1.0,
        "eas_epsilon": pack.eas_epsilon,
    }


def format_db(value: float) -> str:
    return "inf" if math.isinf(value) else f"{value:.4f}"

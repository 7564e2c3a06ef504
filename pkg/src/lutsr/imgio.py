"""PNG I/O, color conversion and degradation generation for test pairs.

All degradations are float-computed, rounded half away from zero, clamped to
[0, 255], and deterministic under a seed.
"""

from __future__ import annotations

import numpy as np
from PIL import Image

from .planes import round_half_away


def load_image(path) -> np.ndarray:
    """Load an 8-bit PNG as (H, W) grayscale or (H, W, 3) RGB uint8."""
    with Image.open(path) as im:
        if im.mode == "L":
            return np.asarray(im, dtype=np.uint8)
        if im.mode == "RGB":
            return np.asarray(im, dtype=np.uint8)
        if im.mode in ("RGBA", "LA", "P", "I;16", "I", "1"):
            raise ValueError(f"unsupported image mode {im.mode!r}: need 8-bit L or RGB")
        raise ValueError(f"unsupported image mode {im.mode!r}")


def save_image(img, path):
    arr = np.asarray(img)
    if arr.dtype != np.uint8:
        raise ValueError("images are saved as 8-bit data; finalize first")
    if arr.ndim == 2:
        Image.fromarray(arr, mode="L").save(path, format="PNG")
    elif arr.ndim == 3 and arr.shape[2] == 3:
        Image.fromarray(arr, mode="RGB").save(path, format="PNG")
    else:
        raise ValueError(f"expected (H, W) or (H, W, 3), got shape {arr.shape}")


def rgb_to_y(img) -> np.ndarray:
    """Full-range BT.601 luma, rounded to uint8."""
    arr = np.asarray(img, dtype=np.float64)
    if arr.ndim != 3 or arr.shape[2] != 3:
        raise ValueError(f"expected (H, W, 3) RGB, got shape {arr.shape}")
    y = 0.299 * arr[..., 0] + 0.587 * arr[..., 1] + 0.114 * arr[..., 2]
    return np.clip(round_half_away(y), 0, 255).astype(np.uint8)


def _cubic(x: np.ndarray, a: float = -0.5) -> np.ndarray:
    ax = np.abs(x)
    w = np.where(
        ax <= 1.0,
        (a + 2.0) * ax**3 - (a + 3.0) * ax**2 + 1.0,
        np.where(ax < 2.0, a * ax**3 - 5.0 * a * ax**2 + 8.0 * a * ax - 4.0 * a, 0.0),
    )
    return w


def _resample_axis(values: np.ndarray, factor: int) -> np.ndarray:
    """Separable bicubic decimation along axis 0 (a = -0.5, antialiased kernel
    widened by the factor, edge taps replicated, weights normalized)."""
    n = values.shape[0]
    m = n // factor
    out = np.empty((m,) + values.shape[1:], dtype=np.float64)
    support = 2.0 * factor
    for i in range(m):
        center = (i + 0.5) * factor - 0.5
        lo = int(np.ceil(center - support))
        hi = int(np.floor(center + support))
        taps = np.arange(lo, hi + 1)
        weights = _cubic((taps - center) / factor)
        weights = weights / weights.sum()
        src = np.clip(taps, 0, n - 1)
        out[i] = np.tensordot(weights, values[src], axes=(0, 0))
    return out


def bicubic_downsample(img, factor: int) -> np.ndarray:
    """Bicubic decimation by an integer factor; H and W must divide evenly."""
    arr = np.asarray(img, dtype=np.float64)
    if factor < 1:
        raise ValueError("factor must be >= 1")
    if factor == 1:
        return np.asarray(img).copy()
    if arr.shape[0] % factor or arr.shape[1] % factor:
        raise ValueError(
            f"size {arr.shape[:2]} not divisible by factor {factor}"
        )
    out = _resample_axis(arr, factor)
    out = np.swapaxes(_resample_axis(np.swapaxes(out, 0, 1), factor), 0, 1)
    return np.clip(round_half_away(out), 0, 255).astype(np.uint8)


def add_gaussian_noise(img, sigma: float, seed: int) -> np.ndarray:
    """Per-pixel i.i.d. N(0, sigma^2) in float, rounded and clamped."""
    if sigma < 0:
        raise ValueError("sigma must be >= 0")
    arr = np.asarray(img, dtype=np.float64)
    if sigma == 0:
        return np.asarray(img).copy()
    rng = np.random.default_rng(seed)
    noisy = arr + rng.normal(0.0, sigma, arr.shape)
    return np.clip(round_half_away(noisy), 0, 255).astype(np.uint8)

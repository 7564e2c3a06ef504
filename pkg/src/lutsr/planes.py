"""Integer image/feature containers and the spatial primitives shared by the
whole pipeline: bit-plane decomposition, channel shifts, pixel shuffle,
quarter-turn rotation and index quantization.

All operations are pure; arrays handed in are never mutated.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

# Activations between layers are kept as signed wide integers and clamped to an
# unsigned index range right before each table lookup.
WIDE = np.int64


def round_half_away(x):
    """Round floats to int64, ties away from zero (0.5 -> 1, -0.5 -> -1)."""
    x = np.asarray(x, dtype=np.float64)
    return (np.sign(x) * np.floor(np.abs(x) + 0.5)).astype(WIDE)


def div_round_half_away(num, den):
    """Exact integer num/den rounded half away from zero.

    `den` may be a positive scalar or an array broadcastable against `num`.
    """
    num = np.asarray(num, dtype=WIDE)
    den = np.asarray(den, dtype=WIDE)
    mag = (np.abs(num) + den // 2) // den
    return np.where(num < 0, -mag, mag).astype(WIDE)


@dataclass(frozen=True)
class BitSplit:
    """How an 8-bit intensity is decomposed into parallel branches."""

    msb_bits: int = 6
    lsb_bits: int = 2

    def __post_init__(self):
        if self.msb_bits + self.lsb_bits != 8:
            raise ValueError("bit split must cover exactly 8 bits")
        if self.msb_bits < 1 or self.lsb_bits < 1:
            raise ValueError("both branches need at least one bit")


def as_image_plane(values) -> np.ndarray:
    """Validate and return an (H, W) uint8 plane."""
    arr = np.asarray(values)
    if arr.ndim != 2:
        raise ValueError(f"image plane must be 2-D, got shape {arr.shape}")
    if arr.size == 0:
        raise ValueError("image plane must be nonempty")
    if arr.dtype != np.uint8:
        if np.any(arr < 0) or np.any(arr > 255):
            raise ValueError("image plane values must lie in [0, 255]")
        arr = arr.astype(np.uint8)
    return arr


@dataclass
class FeatureMap:
    """(C, H, W) signed wide-integer activations.

    `index_bits` is set once the values have been clamped to a lookup domain;
    layers refuse inputs that were not quantized to their expected width.
    """

    values: np.ndarray
    index_bits: int | None = None

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=WIDE)
        if self.values.ndim != 3:
            raise ValueError(f"feature map must be (C, H, W), got {self.values.shape}")

    @property
    def channels(self) -> int:
        return self.values.shape[0]

    @property
    def height(self) -> int:
        return self.values.shape[1]

    @property
    def width(self) -> int:
        return self.values.shape[2]


def split_bits(img, split: BitSplit = BitSplit()):
    """Split an 8-bit plane into (msb, lsb) integer planes.

    For every pixel v: v == (msb << lsb_bits) | lsb.
    """
    plane = as_image_plane(img).astype(WIDE)
    msb = plane >> split.lsb_bits
    lsb = plane & ((1 << split.lsb_bits) - 1)
    return msb, lsb


def merge_bits(msb, lsb, split: BitSplit = BitSplit()) -> np.ndarray:
    """Inverse of split_bits."""
    msb = np.asarray(msb, dtype=WIDE)
    lsb = np.asarray(lsb, dtype=WIDE)
    return (msb << split.lsb_bits) | lsb


def quantize_index(fm: FeatureMap, bits: int) -> FeatureMap:
    """Clamp wide activations to the unsigned index range [0, 2^bits - 1]."""
    if bits < 1:
        raise ValueError("index width must be >= 1")
    hi = (1 << bits) - 1
    return FeatureMap(np.clip(fm.values, 0, hi), index_bits=bits)


def shift_channels(fm: FeatureMap, shifts: np.ndarray) -> FeatureMap:
    """Shift each channel by its integer (dx, dy) with replicate padding.

    Output channel c at (x, y) reads input channel c at (x - dx_c, y - dy_c);
    source coordinates outside the grid clamp to the nearest edge.
    """
    shifts = np.asarray(shifts, dtype=np.int64)
    if shifts.shape != (fm.channels, 2):
        raise ValueError(
            f"expected {fm.channels} (dx, dy) pairs, got shape {shifts.shape}"
        )
    if np.any(np.abs(shifts) > 2):
        raise ValueError("shift offsets are clamped to [-2, 2]")
    c, h, w = fm.values.shape
    out = np.empty_like(fm.values)
    for ch in range(c):
        dx, dy = int(shifts[ch, 0]), int(shifts[ch, 1])
        ys = np.clip(np.arange(h) - dy, 0, h - 1)
        xs = np.clip(np.arange(w) - dx, 0, w - 1)
        out[ch] = fm.values[ch][ys[:, None], xs[None, :]]
    return FeatureMap(out, index_bits=fm.index_bits)


def pixel_shuffle_wide(fm: FeatureMap, scale: int) -> np.ndarray:
    """Rearrange r^2 channels into an (rH, rW) wide-integer plane.

    Layout: output(y*r + i, x*r + j) = channel (i*r + j) at (y, x).
    """
    c, h, w = fm.values.shape
    if c != scale * scale:
        raise ValueError(f"pixel shuffle needs {scale * scale} channels, got {c}")
    blocks = fm.values.reshape(scale, scale, h, w)
    return blocks.transpose(2, 0, 3, 1).reshape(h * scale, w * scale)


def pixel_shuffle(fm: FeatureMap, scale: int) -> np.ndarray:
    """pixel_shuffle_wide followed by rounding into a final uint8 image."""
    wide = pixel_shuffle_wide(fm, scale)
    return finalize_plane(wide)


def finalize_plane(wide: np.ndarray) -> np.ndarray:
    """Clamp a wide-integer plane into a displayable [0, 255] uint8 plane."""
    return np.clip(wide, 0, 255).astype(np.uint8)


def rotate(arr: np.ndarray, k: int) -> np.ndarray:
    """Rotate the spatial axes by k quarter turns.

    Counter-clockwise in y-down image coordinates, so [[1,2],[3,4]] with k=1
    becomes [[3,1],[4,2]]. rotate(rotate(x, k), 4-k) recovers x.
    """
    if k not in (0, 1, 2, 3):
        raise ValueError("k must be in {0, 1, 2, 3}")
    arr = np.asarray(arr)
    if arr.ndim == 2:
        return np.rot90(arr, -k)
    return np.rot90(arr, -k, axes=(-2, -1))


def rotate_fm(fm: FeatureMap, k: int) -> FeatureMap:
    return FeatureMap(rotate(fm.values, k), index_bits=fm.index_bits)

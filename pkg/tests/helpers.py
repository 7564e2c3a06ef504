"""Shared generators for the test suite."""

import numpy as np

from lutsr.model import Lut1D, LutPack, ModelDescriptor, sampled_entry_count
from lutsr.planes import BitSplit


def random_pack(rng: np.random.Generator, compressed=False) -> LutPack:
    """Random but self-consistent pack: random descriptor, random entries,
    optionally random per-table strides."""
    n_blocks = int(rng.integers(0, 3))
    variant = {0: "S", 1: "M"}.get(n_blocks, "custom")
    channels = int(rng.integers(1, 6))
    scale = int(rng.integers(1, 4))
    msb = int(rng.integers(4, 8))
    d = ModelDescriptor(
        variant=variant,
        n_blocks=n_blocks,
        channels=channels,
        scale=scale,
        bit_split=BitSplit(msb, 8 - msb),
        index_bits=int(rng.integers(2, 8)),
        shift_tables=rng.integers(-2, 3, (n_blocks, channels, 2)).astype(np.int8),
    )
    tables = []
    for spec in d.layer_specs():
        for p, ci, co in spec.slots():
            stride = 1
            if compressed:
                stride = int(2 ** rng.integers(0, spec.in_bits + 1))
            n = sampled_entry_count(spec.in_bits, stride)
            entries = rng.integers(-128, 128, n).astype(np.int8)
            tables.append(Lut1D(spec.role, p, ci, co, spec.in_bits, stride, entries))
    eps = float(np.float32(rng.uniform(0.05, 1.0))) if compressed else None
    return LutPack(d, tables, eas_epsilon=eps)


def random_table(rng: np.random.Generator, in_bits: int) -> np.ndarray:
    """Entry families spanning easy and hard compression cases."""
    n = 1 << in_bits
    family = rng.integers(4)
    if family == 0:  # raw noise
        vals = rng.integers(-128, 128, n).astype(np.float64)
    elif family == 1:  # smooth walk
        vals = np.cumsum(rng.normal(0, 2.0, n)) + rng.uniform(-40, 40)
    elif family == 2:  # near-linear ramp with noise
        slope = rng.uniform(-2, 2)
        vals = slope * np.arange(n) + rng.uniform(-30, 30) + rng.normal(0, 0.6, n)
    else:  # piecewise constant plateaus
        vals = np.repeat(rng.integers(-100, 100, max(1, n // 8)), 8)[:n].astype(np.float64)
    return np.clip(np.round(vals), -128, 127).astype(np.int8)


def blocky_image(seed: int, shape=(16, 16), block=8) -> np.ndarray:
    """Per-block constant levels plus mild noise: visible 8-aligned seams."""
    rng = np.random.default_rng(seed)
    img = np.zeros(shape)
    for by in range(0, shape[0], block):
        for bx in range(0, shape[1], block):
            img[by : by + block, bx : bx + block] = rng.integers(30, 220)
    return (img + rng.normal(0, 3, shape)).clip(0, 255).astype(np.uint8)

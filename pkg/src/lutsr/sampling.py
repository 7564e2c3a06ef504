"""Error-bounded adaptive table compression and cached-buffer inference.

Offline: each stride-1 table independently keeps the largest power-of-two
stride whose weighted interpolation error stays strictly below the tolerance.
Online: compressed tables are expanded once per layer into dense query buffers
so pixel processing needs a single read per lookup.
"""

from __future__ import annotations

import numpy as np

from . import engine
from .engine import OpCounter, lut_query
from .model import Lut1D, LutPack
from .planes import WIDE


def stride_candidates(in_bits: int, k_max: int = None) -> list:
    """Powers of two up to 2^k_max, capped at the index domain size."""
    if k_max is None:
        k_max = in_bits
    if k_max < 0 or (1 << k_max) > (1 << in_bits):
        raise ValueError("stride cap exceeds the index domain")
    return [1 << k for k in range(k_max + 1)]


def subsample_table(lut: Lut1D, stride: int) -> Lut1D:
    """Keep entries at indices 0, s, 2s, ... plus the top index 2^b - 1."""
    if lut.stride != 1:
        raise ValueError("subsampling starts from a stride-1 table")
    if stride == 1:
        return Lut1D(lut.role, lut.position, lut.in_channel, lut.out_channel,
                     lut.in_bits, 1, lut.entries.copy())
    n = 1 << lut.in_bits
    if stride > n or (stride & (stride - 1)) != 0:
        raise ValueError("stride must be a power of two within the domain")
    keep = np.concatenate([np.arange(0, n, stride), [n - 1]])
    return Lut1D(lut.role, lut.position, lut.in_channel, lut.out_channel,
                 lut.in_bits, stride, lut.entries[keep])


def interp_error(lut: Lut1D, stride: int) -> float:
    """Storage-weighted mean absolute interpolation error at a candidate stride.

    Error(s) = s/(s-1) * E_i |Query_s(i) - LUT[i]| over the full index set;
    Error(1) is 0 by convention (stride 1 loses nothing and the weight is
    singular there).
    """
    if stride < 1 or (stride & (stride - 1)) != 0:
        raise ValueError("stride must be a positive power of two")
    if lut.stride != 1:
        raise ValueError("interpolation error is measured against a stride-1 table")
    if stride == 1:
        return 0.0
    idx = np.arange(1 << lut.in_bits, dtype=WIDE)
    approx = lut_query(subsample_table(lut, stride), idx)
    exact = lut.entries.astype(WIDE)
    mean_abs = float(np.mean(np.abs(approx - exact)))
    return stride / (stride - 1) * mean_abs


def search_stride(lut: Lut1D, epsilon: float, k_max: int = None) -> int:
    """Largest candidate stride with Error(s) < epsilon (strict).

    Stride 1 has zero error by convention, so the search always succeeds.
    """
    if epsilon <= 0:
        raise ValueError("tolerance must be positive")
    best = 1
    for s in stride_candidates(lut.in_bits, k_max):
        if interp_error(lut, s) < epsilon:
            best = max(best, s)
    return best


def compress_pack(pack: LutPack, epsilon: float) -> LutPack:
    """Replace every stride-1 table by its subsampled version at its own
    optimal stride; descriptor unchanged, tolerance recorded."""
    if any(t.stride != 1 for t in pack.tables):
        raise ValueError("compression expects a stride-1 pack")
    tables = [subsample_table(t, search_stride(t, epsilon)) for t in pack.tables]
    return LutPack(pack.descriptor, tables, eas_epsilon=epsilon)


def uniform_compress(pack: LutPack, stride: int) -> LutPack:
    """Fixed-stride baseline: the same stride for every table."""
    tables = [subsample_table(t, min(stride, 1 << t.in_bits)) for t in pack.tables]
    return LutPack(pack.descriptor, tables, eas_epsilon=None)


def build_buffer(lut: Lut1D) -> np.ndarray:
    """Dense per-index cache: buffer[i] == lut_query(lut, i) for the whole
    domain (2^in_bits wide-integer entries)."""
    return lut_query(lut, np.arange(1 << lut.in_bits, dtype=WIDE))


def cached_forward(pack: LutPack, img, counter: OpCounter = None) -> np.ndarray:
    """Rotation-ensemble LUT inference where every query is one buffer read.

    Buffers are rebuilt once per (image, layer) before its pixel loop;
    semantics are identical to engine.forward, bit for bit.
    """
    return engine._ensemble(pack, img, cached=True, counter=counter)

"""Integer-only forward pass over a table pack.

Two query backends share the layer walk:

* the interpolated path resolves every lookup against the (possibly
  subsampled) table with per-pixel linear interpolation;
* the cached path first expands each table into a dense per-index buffer
  (once per layer, Alg.-style serial cascade) and then resolves every lookup
  with a single buffer read.

Both are deterministic and must produce identical images; an OpCounter can be
passed to audit the per-query work.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np

from .model import ROLE_DEPTHWISE, Lut1D, LutPack
from .planes import (
    WIDE,
    FeatureMap,
    div_round_half_away,
    rotate,
    shift_channels,
    split_bits,
)


@dataclass
class OpCounter:
    """Work audit for one forward pass, in per-(table, pixel) query units."""

    queries: int = 0            # total lookups requested
    buffer_reads: int = 0       # cached path: one dense read per query
    table_reads: int = 0        # interpolated path: entry fetches
    interp_ops: int = 0         # interpolated path: mul/add/div terms
    buffer_build_queries: int = 0  # per-layer buffer precomputation
    layer_seconds: dict = field(default_factory=dict)


def lut_query(lut: Lut1D, i) -> np.ndarray:
    """Query a table at integer index/indices i in [0, 2^in_bits).

    Stride 1 reads the entry directly. At stride s the sampled grid is linearly
    interpolated; the final partial cell [2^b - s, 2^b - 1] ends at the stored
    top endpoint, so its actual span is s - 1 and interpolation never
    extrapolates.
    """
    i = np.asarray(i, dtype=WIDE)
    if np.any(i < 0) or np.any(i >= (1 << lut.in_bits)):
        raise ValueError("index out of range")
    entries = lut.entries.astype(WIDE)
    if lut.stride == 1:
        return entries[i]
    return _interp_entries(entries, lut.stride, i)


def _interp_entries(entries64: np.ndarray, stride: int, i: np.ndarray) -> np.ndarray:
    q = i // stride
    w = i - q * stride
    last_cell = entries64.shape[0] - 2
    span = np.where(q == last_cell, stride - 1, stride)
    num = (span - w) * entries64[q] + w * entries64[q + 1]
    return div_round_half_away(num, span)


def _layer_indices(role: str, values: np.ndarray) -> np.ndarray:
    """Index planes per (position, in_channel) slot, flattened to (S, H*W)."""
    c, h, w = values.shape
    if role == "pointwise":
        return values.reshape(c, h * w)
    padded = np.pad(values, ((0, 0), (1, 1), (1, 1)), mode="edge")
    slots = np.empty((9, c, h, w), dtype=values.dtype)
    for p in range(9):
        ky, kx = divmod(p, 3)
        slots[p] = padded[:, ky : ky + h, kx : kx + w]
    return slots.reshape(9 * c, h * w)


def _eval_layer_interp(spec, luts, fm: FeatureMap, counter) -> np.ndarray:
    if fm.index_bits != spec.in_bits:
        raise ValueError(
            f"layer expects {spec.in_bits}-bit indices, input is quantized to "
            f"{fm.index_bits}"
        )
    h, w = fm.values.shape[1:]
    idx = _layer_indices(spec.role, fm.values)
    acc = np.zeros((spec.out_channels, h * w), dtype=WIDE)
    npx = h * w
    it = iter(luts)
    for slot in range(idx.shape[0]):
        iv = idx[slot]
        if spec.role == ROLE_DEPTHWISE:
            t = next(it)
            acc[slot % spec.in_channels] += _query_counted(t, iv, counter, npx)
        else:
            for _ in range(spec.out_channels):
                t = next(it)
                acc[t.out_channel] += _query_counted(t, iv, counter, npx)
    out = div_round_half_away(acc, spec.terms)
    return out.reshape(spec.out_channels, h, w)


def _query_counted(t: Lut1D, iv, counter, npx):
    entries = t.entries.astype(WIDE)
    if t.stride == 1:
        if counter is not None:
            counter.queries += npx
            counter.table_reads += npx
        return entries[iv]
    if counter is not None:
        counter.queries += npx
        counter.table_reads += 2 * npx
        counter.interp_ops += 4 * npx  # two weight products, one sum, one rounded division
    return _interp_entries(entries, t.stride, iv)


def build_layer_buffers(spec, luts) -> np.ndarray:
    """Dense query buffers for one layer.

    Shape (positions*in_channels, 2^b, out_width): out_width is out_channels
    for conv/pointwise grids and 1 for channel-preserving depthwise tables.
    Buffer[slot, i, j] is the interpolated query of that table at index i.
    """
    b = 1 << spec.in_bits
    out_w = 1 if spec.role == ROLE_DEPTHWISE else spec.out_channels
    buf = np.empty((spec.positions * spec.in_channels, b, out_w), dtype=WIDE)
    idx = np.arange(b, dtype=WIDE)
    it = iter(luts)
    if spec.role == ROLE_DEPTHWISE:
        for slot in range(buf.shape[0]):
            buf[slot, :, 0] = lut_query(next(it), idx)
    else:
        for slot in range(buf.shape[0]):
            for j in range(out_w):
                buf[slot, :, j] = lut_query(next(it), idx)
    return buf


def _eval_layer_cached(spec, luts, fm: FeatureMap, counter) -> np.ndarray:
    if fm.index_bits != spec.in_bits:
        raise ValueError(
            f"layer expects {spec.in_bits}-bit indices, input is quantized to "
            f"{fm.index_bits}"
        )
    h, w = fm.values.shape[1:]
    buffers = build_layer_buffers(spec, luts)
    if counter is not None:
        counter.buffer_build_queries += buffers.shape[0] * buffers.shape[1] * buffers.shape[2]
    idx = _layer_indices(spec.role, fm.values)
    npx = h * w
    if spec.role == ROLE_DEPTHWISE:
        c = spec.in_channels
        acc = np.zeros((c, npx), dtype=WIDE)
        for p in range(spec.positions):
            rows = buffers[p * c : (p + 1) * c, :, 0]
            acc += np.take_along_axis(rows, idx[p * c : (p + 1) * c], axis=1)
            if counter is not None:
                counter.queries += c * npx
                counter.buffer_reads += c * npx
    else:
        acc = np.zeros((npx, spec.out_channels), dtype=WIDE)
        for slot in range(idx.shape[0]):
            acc += buffers[slot][idx[slot]]
            if counter is not None:
                counter.queries += spec.out_channels * npx
                counter.buffer_reads += spec.out_channels * npx
        acc = acc.T
    out = div_round_half_away(acc, spec.terms)
    return out.reshape(spec.out_channels, h, w)


def sms_layer_forward(spec, luts, fm: FeatureMap, cached: bool = False,
                      counter: OpCounter = None) -> FeatureMap:
    """One separable layer: mean over kernel positions/in-channels of table
    lookups, left in wide integers."""
    evaluate = _eval_layer_cached if cached else _eval_layer_interp
    return FeatureMap(evaluate(spec, luts, fm, counter))


def shift_block_forward(pw, dw, shifts, fm: FeatureMap, index_bits: int,
                        cached: bool = False, counter: OpCounter = None) -> FeatureMap:
    """Shift -> quantize -> pointwise -> quantize -> depthwise, with residual
    additions of the quantized input where the layer flags say."""
    pw_spec, pw_luts = pw
    dw_spec, dw_luts = dw
    x = shift_channels(fm, shifts)
    hi = (1 << index_bits) - 1
    for spec, luts in ((pw_spec, pw_luts), (dw_spec, dw_luts)):
        xq = FeatureMap(np.clip(x.values, 0, hi), index_bits=index_bits)
        y = sms_layer_forward(spec, luts, xq, cached=cached, counter=counter)
        if spec.residual:
            y = FeatureMap(y.values + xq.values)
        x = y
    return x


def _pass(pack: LutPack, img: np.ndarray, cached: bool, counter) -> np.ndarray:
    d = pack.descriptor
    groups = pack.layer_tables()
    hi = (1 << d.index_bits) - 1
    msb, lsb = split_bits(img, d.bit_split)

    def run_layer(i, fm):
        t0 = time.perf_counter()
        out = sms_layer_forward(groups[i][0], groups[i][1], fm, cached=cached,
                                counter=counter)
        if counter is not None:
            key = f"layer{i}:{groups[i][0].role}"
            counter.layer_seconds[key] = counter.layer_seconds.get(key, 0.0) + (
                time.perf_counter() - t0
            )
        return out

    a = run_layer(0, FeatureMap(msb[None], index_bits=d.bit_split.msb_bits))
    b = run_layer(1, FeatureMap(lsb[None], index_bits=d.bit_split.lsb_bits))
    x = FeatureMap(a.values + b.values)
    for blk in range(d.n_blocks):
        x = shift_channels(x, d.shift_tables[blk])
        for li in (2 + 2 * blk, 3 + 2 * blk):
            spec = groups[li][0]
            xq = FeatureMap(np.clip(x.values, 0, hi), index_bits=d.index_bits)
            y = run_layer(li, xq)
            if spec.residual:
                y = FeatureMap(y.values + xq.values)
            x = y
    xq = FeatureMap(np.clip(x.values, 0, hi), index_bits=d.index_bits)
    y = run_layer(len(groups) - 1, xq)
    c, h, w = y.values.shape
    r = d.scale
    return y.values.reshape(r, r, h, w).transpose(2, 0, 3, 1).reshape(h * r, w * r)


def _ensemble(pack: LutPack, img: np.ndarray, cached: bool, counter) -> np.ndarray:
    img = np.asarray(img)
    r = pack.descriptor.scale
    acc = np.zeros((img.shape[0] * r, img.shape[1] * r), dtype=WIDE)
    for k in range(4):
        out = _pass(pack, rotate(img, k), cached, counter)
        acc += rotate(out, (4 - k) % 4)
    return np.clip(div_round_half_away(acc, 4), 0, 255).astype(np.uint8)


def forward(pack: LutPack, img, counter: OpCounter = None) -> np.ndarray:
    """Rotation-ensemble LUT inference with per-pixel interpolated queries."""
    return _ensemble(pack, img, cached=False, counter=counter)

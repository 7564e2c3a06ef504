"""Seedable floating-point reference model built from scalar unit functions.

Every layer is separable: its output is an average of single-scalar function
evaluations, one unit function per (position, in-channel, out-channel) slot.
That structure makes exhaustive table transfer exact, so this model doubles as
the correctness oracle for the integer engine.

Two forward passes exist:

* ``ref_forward`` — float pipeline. Rectifier after every layer aggregation
  except the final pointwise; inputs clamped to each layer's index domain.
* ``ref_forward_quantized`` — the float model pushed through the engine's
  integer chain (index clamps between layers, per-unit int8 output rounding,
  integer means, single final rounding). The fused branches are added as raw
  wide integers and rectified by the following index clamp, matching the
  engine's fusion point. This is the bit-exact reference for LUT inference.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass

import numpy as np

from .model import (
    ENTRY_MAX,
    ENTRY_MIN,
    MAX_SHIFT,
    ROLE_CONV3X3,
    ROLE_DEPTHWISE,
    ROLE_POINTWISE,
    VARIANT_BLOCKS,
    LayerSpec,
    ModelDescriptor,
)
from .planes import (
    FeatureMap,
    div_round_half_away,
    rotate,
    round_half_away,
    shift_channels,
    split_bits,
)

KIND_IDENTITY = "identity"
KIND_AFFINE = "affine"
KIND_POLY = "clamped-poly"
KIND_TABULATED = "tabulated"

_PARAM_WIDTH = {KIND_IDENTITY: 0, KIND_AFFINE: 2, KIND_POLY: 4, KIND_TABULATED: 256}

# clamped-poly output bounds; generators stay inside them so int8 transfer
# saturates nowhere by construction.
_POLY_LO, _POLY_HI = -127.0, 127.0


@dataclass(frozen=True)
class UnitFunction:
    """One scalar->scalar mapping, defined on [0, 2^b - 1] for its layer."""

    kind: str
    params: tuple = ()

    def __post_init__(self):
        if self.kind not in _PARAM_WIDTH:
            raise ValueError(f"unknown unit-function kind {self.kind!r}")
        if len(self.params) != _PARAM_WIDTH[self.kind]:
            raise ValueError(
                f"{self.kind} takes {_PARAM_WIDTH[self.kind]} parameters, "
                f"got {len(self.params)}"
            )


def eval_kind(kind: str, params: np.ndarray, x, in_bits: int) -> np.ndarray:
    """Evaluate a batch of unit functions of one kind.

    ``params`` has the per-function parameters on its last axis and must be
    pre-shaped so ``params.shape[:-1]`` broadcasts against ``x``.
    """
    x = np.asarray(x, dtype=np.float64)
    if kind == KIND_IDENTITY:
        shape = np.broadcast_shapes(params.shape[:-1], x.shape)
        return np.broadcast_to(x, shape)
    if kind == KIND_AFFINE:
        return params[..., 0] * x + params[..., 1]
    if kind == KIND_POLY:
        t = x / float((1 << in_bits) - 1)
        acc = np.zeros(np.broadcast_shapes(params.shape[:-1], x.shape))
        for k in range(params.shape[-1] - 1, -1, -1):
            acc = acc * t + params[..., k]
        return np.clip(acc, _POLY_LO, _POLY_HI)
    if kind == KIND_TABULATED:
        lead = np.broadcast_shapes(params.shape[:-1], x.shape)
        table = np.broadcast_to(params, lead + (params.shape[-1],))
        xc = np.broadcast_to(x, lead)
        x0 = np.clip(np.floor(xc), 0, params.shape[-1] - 2).astype(np.int64)
        w = xc - x0
        p0 = np.take_along_axis(table, x0[..., None], -1)[..., 0]
        p1 = np.take_along_axis(table, (x0 + 1)[..., None], -1)[..., 0]
        return p0 * (1.0 - w) + p1 * w
    raise ValueError(f"unknown unit-function kind {kind!r}")


def eval_unit(f: UnitFunction, x, in_bits: int) -> np.ndarray:
    return eval_kind(f.kind, np.asarray(f.params, dtype=np.float64), x, in_bits)


def quantize_unit_output(y) -> np.ndarray:
    """Round a unit-function response into the int8 entry range."""
    return np.clip(round_half_away(y), ENTRY_MIN, ENTRY_MAX)


@dataclass
class RefLayer:
    """A grid of same-kind unit functions filling one layer's slots.

    Parameter array shapes: (9, Cin, Cout, K) for conv3x3, (9, C, K) for
    depthwise, (1, Cin, Cout, K) for pointwise.
    """

    spec: LayerSpec
    kind: str
    params: np.ndarray

    def unit_at(self, position: int, in_channel: int, out_channel: int) -> UnitFunction:
        if self.spec.role == ROLE_DEPTHWISE:
            if in_channel != out_channel:
                raise ValueError("depthwise slots are channel-preserving")
            row = self.params[position, in_channel]
        else:
            row = self.params[position, in_channel, out_channel]
        return UnitFunction(self.kind, tuple(float(v) for v in row))


@dataclass
class ReferenceNet:
    descriptor: ModelDescriptor
    layers: list
    # Diagnostic symmetric variant: a parallel LSB trunk mirroring the MSB
    # depth (used only by the sparsity probe; never transferred).
    sym_lsb_layers: list = None
    sym_lsb_shifts: np.ndarray = None

    @property
    def symmetric(self) -> bool:
        return self.sym_lsb_layers is not None


def _param_shape(spec: LayerSpec, kind: str) -> tuple:
    k = _PARAM_WIDTH[kind]
    if spec.role == ROLE_DEPTHWISE:
        return (spec.positions, spec.in_channels, k)
    return (spec.positions, spec.in_channels, spec.out_channels, k)


def _draw_params(rng: np.random.Generator, spec: LayerSpec, kind: str) -> np.ndarray:
    shape = _param_shape(spec, kind)
    n = int(np.prod(shape[:-1], dtype=np.int64))
    if kind == KIND_IDENTITY:
        return np.zeros(shape)
    if kind == KIND_AFFINE:
        # endpoints drawn in a band that keeps aggregates inside the index range
        y0 = rng.uniform(-10.0, 70.0, n)
        y1 = rng.uniform(-10.0, 70.0, n)
        a = (y1 - y0) / float((1 << spec.in_bits) - 1) if spec.in_bits > 0 else y1 * 0
        flat = np.stack([a, y0], axis=-1)
    elif kind == KIND_POLY:
        c0 = rng.uniform(5.0, 55.0, n)
        rest = rng.uniform(-15.0, 15.0, (n, 3))
        flat = np.concatenate([c0[:, None], rest], axis=1)
    elif kind == KIND_TABULATED:
        start = rng.uniform(5.0, 55.0, (n, 1))
        walk = np.cumsum(rng.normal(0.0, 2.0, (n, 256)), axis=1)
        flat = np.clip(start + walk, -120.0, 120.0)
    else:
        raise ValueError(kind)
    return flat.reshape(shape)


def _identity_layer(spec: LayerSpec) -> RefLayer:
    return RefLayer(spec, KIND_IDENTITY, np.zeros(_param_shape(spec, KIND_IDENTITY)))


def make_reference_net(
    descriptor: ModelDescriptor,
    seed: int,
    identity: bool = False,
    kinds: tuple = (KIND_POLY, KIND_AFFINE, KIND_TABULATED),
    symmetric_lsb: bool = False,
) -> ReferenceNet:
    """Deterministically generate a reference model for (descriptor, seed).

    One unit-function kind is drawn per layer (parameters vary per slot) so
    layer evaluation stays batched. ``identity=True`` makes every unit
    function x -> x. ``symmetric_lsb=True`` adds the diagnostic parallel LSB
    trunk used by the sparsity probe.
    """
    descriptor.validate()
    rng = np.random.default_rng(seed)
    layers = []
    for spec in descriptor.layer_specs():
        if identity:
            layers.append(_identity_layer(spec))
        else:
            kind = kinds[int(rng.integers(len(kinds)))]
            layers.append(RefLayer(spec, kind, _draw_params(rng, spec, kind)))
    net = ReferenceNet(descriptor, layers)
    if symmetric_lsb:
        sym_specs = []
        c = descriptor.channels
        for b in range(descriptor.n_blocks):
            sym_specs.append(LayerSpec(ROLE_POINTWISE, c, c, descriptor.index_bits,
                                       descriptor.residual_flags[2 + 2 * b]))
            sym_specs.append(LayerSpec(ROLE_DEPTHWISE, c, c, descriptor.index_bits,
                                       descriptor.residual_flags[3 + 2 * b]))
        sym_layers = []
        for spec in sym_specs:
            if identity:
                sym_layers.append(_identity_layer(spec))
            else:
                kind = kinds[int(rng.integers(len(kinds)))]
                sym_layers.append(RefLayer(spec, kind, _draw_params(rng, spec, kind)))
        net.sym_lsb_layers = sym_layers
        net.sym_lsb_shifts = rng.integers(
            -MAX_SHIFT, MAX_SHIFT + 1, (descriptor.n_blocks, c, 2)
        ).astype(np.int8)
    return net


def random_reference_net(
    variant: str,
    seed: int,
    channels: int = 16,
    scale: int = 4,
    kinds: tuple = (KIND_POLY, KIND_AFFINE, KIND_TABULATED),
) -> ReferenceNet:
    """Random model with random per-channel shifts baked into its descriptor."""
    rng = np.random.default_rng(seed)
    n_blocks = VARIANT_BLOCKS[variant]
    shifts = rng.integers(-MAX_SHIFT, MAX_SHIFT + 1, (n_blocks, channels, 2)).astype(np.int8)
    descriptor = ModelDescriptor(
        variant=variant, n_blocks=n_blocks, channels=channels, scale=scale,
        shift_tables=shifts,
    )
    return make_reference_net(descriptor, int(rng.integers(2**31)), kinds=kinds)


def parameter_checksum(net: ReferenceNet) -> str:
    """Stable digest of every parameter in the net (platform-independent)."""
    h = hashlib.sha256()
    d = net.descriptor
    h.update(f"{d.variant}|{d.n_blocks}|{d.channels}|{d.scale}|"
             f"{d.bit_split.msb_bits}|{d.index_bits}|{d.residual_flags}".encode())
    h.update(np.ascontiguousarray(d.shift_tables).tobytes())
    for layer in net.layers + (net.sym_lsb_layers or []):
        h.update(layer.kind.encode())
        h.update(np.ascontiguousarray(layer.params, dtype=np.float64).tobytes())
    if net.sym_lsb_shifts is not None:
        h.update(np.ascontiguousarray(net.sym_lsb_shifts).tobytes())
    return h.hexdigest()


def _windows(values: np.ndarray, position: int) -> np.ndarray:
    """Replicate-padded 3x3 sample of every pixel for one kernel position."""
    ky, kx = divmod(position, 3)
    padded = np.pad(values, ((0, 0), (1, 1), (1, 1)), mode="edge")
    h, w = values.shape[1:]
    return padded[:, ky : ky + h, kx : kx + w]


def _layer_float(layer: RefLayer, x: np.ndarray) -> np.ndarray:
    """Mean of unit-function responses; x is (Cin, H, W) float in-domain."""
    spec = layer.spec
    h, w = x.shape[1:]
    acc = np.zeros((spec.out_channels, h, w))
    if spec.role == ROLE_DEPTHWISE:
        for p in range(spec.positions):
            xs = _windows(x, p)
            acc += eval_kind(layer.kind, layer.params[p][:, None, None, :], xs, spec.in_bits)
    elif spec.role == ROLE_CONV3X3:
        for p in range(spec.positions):
            xs = _windows(x, p)
            for ci in range(spec.in_channels):
                acc += eval_kind(layer.kind, layer.params[p, ci][:, None, None, :],
                                 xs[ci], spec.in_bits)
    else:
        for ci in range(spec.in_channels):
            acc += eval_kind(layer.kind, layer.params[0, ci][:, None, None, :],
                             x[ci], spec.in_bits)
    return acc / spec.terms


def _clamp_domain(x: np.ndarray, in_bits: int) -> np.ndarray:
    return np.clip(x, 0.0, float((1 << in_bits) - 1))


def _shift_float(x: np.ndarray, shifts: np.ndarray) -> np.ndarray:
    c, h, w = x.shape
    out = np.empty_like(x)
    for ch in range(c):
        dx, dy = int(shifts[ch, 0]), int(shifts[ch, 1])
        ys = np.clip(np.arange(h) - dy, 0, h - 1)
        xs = np.clip(np.arange(w) - dx, 0, w - 1)
        out[ch] = x[ch][ys[:, None], xs[None, :]]
    return out


def _trunk_float(conv_layer, block_layers, shifts, plane, index_bits, collect=None):
    """Feature-extraction conv plus Shift-Block stack, rectified per layer."""
    x = _layer_float(conv_layer, plane[None].astype(np.float64))
    x = np.maximum(x, 0.0)
    if collect is not None:
        collect.append(x)
    for b in range(len(block_layers) // 2):
        x = _shift_float(x, shifts[b])
        for layer in (block_layers[2 * b], block_layers[2 * b + 1]):
            xq = _clamp_domain(x, index_bits)
            y = _layer_float(layer, xq)
            if layer.spec.residual:
                y = y + xq
            x = np.maximum(y, 0.0)
            if collect is not None:
                collect.append(x)
    return x


def _shuffle_float(x: np.ndarray, scale: int) -> np.ndarray:
    c, h, w = x.shape
    return x.reshape(scale, scale, h, w).transpose(2, 0, 3, 1).reshape(h * scale, w * scale)


def _float_pass(net: ReferenceNet, img: np.ndarray) -> np.ndarray:
    d = net.descriptor
    msb, lsb = split_bits(img, d.bit_split)
    if net.symmetric:
        # diagnostic shape: two parallel full trunks, fused before the head
        a = _trunk_float(net.layers[0], net.layers[2:-1], d.shift_tables, msb,
                         d.index_bits)
        b = _trunk_float(net.layers[1], net.sym_lsb_layers, net.sym_lsb_shifts,
                         lsb, d.index_bits)
        x = a + b
    else:
        # deployed shape: single-conv LSB branch fused right after extraction,
        # the Shift-Block stack runs on the sum
        a = np.maximum(_layer_float(net.layers[0], msb[None].astype(np.float64)), 0.0)
        b = np.maximum(_layer_float(net.layers[1], lsb[None].astype(np.float64)), 0.0)
        x = a + b
        for blk in range(d.n_blocks):
            x = _shift_float(x, d.shift_tables[blk])
            for layer in (net.layers[2 + 2 * blk], net.layers[3 + 2 * blk]):
                xq = _clamp_domain(x, d.index_bits)
                y = _layer_float(layer, xq)
                if layer.spec.residual:
                    y = y + xq
                x = np.maximum(y, 0.0)
    xq = _clamp_domain(x, d.index_bits)
    y = _layer_float(net.layers[-1], xq)
    return _shuffle_float(y, d.scale)


def ref_forward(net: ReferenceNet, img) -> np.ndarray:
    """Full float pipeline averaged over the 4-rotation ensemble."""
    img = np.asarray(img)
    outs = [rotate(_float_pass(net, rotate(img, k)), (4 - k) % 4) for k in range(4)]
    return np.mean(outs, axis=0)


def _layer_quantized(layer: RefLayer, x: np.ndarray) -> np.ndarray:
    """Integer layer: per-unit int8 rounding, exact integer mean."""
    spec = layer.spec
    h, w = x.shape[1:]
    acc = np.zeros((spec.out_channels, h, w), dtype=np.int64)
    if spec.role == ROLE_DEPTHWISE:
        for p in range(spec.positions):
            xs = _windows(x, p)
            acc += quantize_unit_output(
                eval_kind(layer.kind, layer.params[p][:, None, None, :], xs, spec.in_bits)
            )
    elif spec.role == ROLE_CONV3X3:
        for p in range(spec.positions):
            xs = _windows(x, p)
            for ci in range(spec.in_channels):
                acc += quantize_unit_output(
                    eval_kind(layer.kind, layer.params[p, ci][:, None, None, :],
                              xs[ci], spec.in_bits)
                )
    else:
        for ci in range(spec.in_channels):
            acc += quantize_unit_output(
                eval_kind(layer.kind, layer.params[0, ci][:, None, None, :],
                          x[ci], spec.in_bits)
            )
    return div_round_half_away(acc, spec.terms)


def _quantized_pass(net: ReferenceNet, img: np.ndarray) -> np.ndarray:
    d = net.descriptor
    hi = (1 << d.index_bits) - 1
    msb, lsb = split_bits(img, d.bit_split)
    x = _layer_quantized(net.layers[0], msb[None]) + _layer_quantized(net.layers[1], lsb[None])
    for blk in range(d.n_blocks):
        x = shift_channels(FeatureMap(x), d.shift_tables[blk]).values
        for layer in (net.layers[2 + 2 * blk], net.layers[3 + 2 * blk]):
            xq = np.clip(x, 0, hi)
            y = _layer_quantized(layer, xq)
            if layer.spec.residual:
                y = y + xq
            x = y
    xq = np.clip(x, 0, hi)
    y = _layer_quantized(net.layers[-1], xq)
    return _shuffle_float(y, d.scale)  # pure reshape, dtype preserved


def ref_forward_quantized(net: ReferenceNet, img) -> np.ndarray:
    """Reference pipeline under the engine's quantization chain -> uint8 image.

    This is the oracle stride-1 LUT inference must match bit-exactly.
    """
    if net.symmetric:
        raise ValueError("quantized forward is defined for the asymmetric architecture")
    img = np.asarray(img)
    acc = np.zeros((img.shape[0] * net.descriptor.scale,
                    img.shape[1] * net.descriptor.scale), dtype=np.int64)
    for k in range(4):
        out = _quantized_pass(net, rotate(img, k))
        acc += rotate(out, (4 - k) % 4)
    return np.clip(div_round_half_away(acc, 4), 0, 255).astype(np.uint8)


def sparsity_probe(net: ReferenceNet, img, branch: str) -> list:
    """Per-layer fraction of zero post-rectifier activations along a branch.

    The LSB branch is only materialized in depth by the symmetric diagnostic
    variant; probing it on an asymmetric net is an error.
    """
    if branch not in ("msb", "lsb"):
        raise ValueError("branch must be 'msb' or 'lsb'")
    d = net.descriptor
    msb, lsb = split_bits(np.asarray(img), d.bit_split)
    acts = []
    if branch == "msb":
        _trunk_float(net.layers[0], net.layers[2:-1], d.shift_tables, msb,
                     d.index_bits, collect=acts)
    else:
        if not net.symmetric:
            raise ValueError("LSB branch depth is not materialized on this net")
        _trunk_float(net.layers[1], net.sym_lsb_layers, net.sym_lsb_shifts, lsb,
                     d.index_bits, collect=acts)
    return [float(np.mean(a == 0.0)) for a in acts]


def reference_net_from_pack(pack) -> ReferenceNet:
    """Rebuild a tabulated-unit-function net from a stride-1 pack, so trained
    exports round-trip through the reference model."""
    layers = []
    for spec, luts in pack.layer_tables():
        if any(t.stride != 1 for t in luts):
            raise ValueError("only stride-1 packs can seed a reference net")
        params = np.zeros(_param_shape(spec, KIND_TABULATED))
        it = iter(luts)
        for p, ci, co in spec.slots():
            t = next(it)
            n = t.entries.shape[0]
            row = np.empty(256)
            row[:n] = t.entries.astype(np.float64)
            row[n:] = float(t.entries[-1])
            if spec.role == ROLE_DEPTHWISE:
                params[p, ci] = row
            else:
                params[p, ci, co] = row
        layers.append(RefLayer(spec, KIND_TABULATED, params))
    return ReferenceNet(pack.descriptor, layers)

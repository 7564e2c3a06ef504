"""`.lutpack` binary serialization, little-endian throughout.

Layout:

    magic "SLUT" | version u16
    descriptor block:
        variant u8 (0=S 1=M 2=L 3=custom) | n_blocks u16 | channels u16 |
        scale u8 | msb_bits u8 | lsb_bits u8 | index_bits u8 |
        residual_flags u32 bitmask (bit i = layer i) |
        shift tables: n_blocks * channels * (dx i8, dy i8) |
        eas_epsilon f32 (NaN when uncompressed)
    table count u32
    per table:
        role u8 (0=conv3x3 1=depthwise 2=pointwise) | position u8 |
        in_channel u16 | out_channel u16 | in_bits u8 | stride u8 |
        entry count u32 | entries i8[count]

Malformed bytes (bad magic, unknown version, truncation) raise
PackFormatError; structurally valid bytes describing an inconsistent model
raise PackValidationError.
"""

from __future__ import annotations

import math
import struct

import numpy as np

from .model import Lut1D, LutPack, ModelDescriptor
from .planes import BitSplit

MAGIC = b"SLUT"
VERSION = 1

_ROLE_CODES = {"conv3x3": 0, "depthwise": 1, "pointwise": 2}
_ROLE_NAMES = {v: k for k, v in _ROLE_CODES.items()}
_VARIANT_CODES = {"S": 0, "M": 1, "L": 2, "custom": 3}
_VARIANT_NAMES = {v: k for k, v in _VARIANT_CODES.items()}


class PackFormatError(Exception):
    """File bytes are not a parseable .lutpack."""


class PackValidationError(Exception):
    """Parseable bytes describing an inconsistent pack."""


def header_size(descriptor: ModelDescriptor) -> int:
    """Bytes before the first table record (magic through table count)."""
    shift_bytes = descriptor.n_blocks * descriptor.channels * 2
    return 4 + 2 + 13 + shift_bytes + 4 + 4


def serialize(pack: LutPack) -> bytes:
    d = pack.descriptor
    if d.n_layers > 32:
        raise ValueError("residual bitmask supports at most 32 layers")
    out = bytearray()
    out += MAGIC
    out += struct.pack("<H", VERSION)
    flags = 0
    for i, f in enumerate(d.residual_flags):
        if f:
            flags |= 1 << i
    out += struct.pack(
        "<BHHBBBBI",
        _VARIANT_CODES[d.variant],
        d.n_blocks,
        d.channels,
        d.scale,
        d.bit_split.msb_bits,
        d.bit_split.lsb_bits,
        d.index_bits,
        flags,
    )
    out += np.ascontiguousarray(d.shift_tables, dtype=np.int8).tobytes()
    eps = float("nan") if pack.eas_epsilon is None else pack.eas_epsilon
    out += struct.pack("<f", eps)
    out += struct.pack("<I", len(pack.tables))
    for t in pack.tables:
        out += struct.pack(
            "<BBHHBBI",
            _ROLE_CODES[t.role],
            t.position,
            t.in_channel,
            t.out_channel,
            t.in_bits,
            t.stride,
            t.entries.shape[0],
        )
        out += np.ascontiguousarray(t.entries, dtype=np.int8).tobytes()
    return bytes(out)


class _Reader:
    def __init__(self, data: bytes):
        self.data = data
        self.pos = 0

    def take(self, n: int) -> bytes:
        if self.pos + n > len(self.data):
            raise PackFormatError(
                f"truncated pack: wanted {n} bytes at offset {self.pos}, "
                f"file has {len(self.data)}"
            )
        chunk = self.data[self.pos : self.pos + n]
        self.pos += n
        return chunk

    def unpack(self, fmt: str):
        return struct.unpack("<" + fmt, self.take(struct.calcsize("<" + fmt)))


def parse(data: bytes) -> LutPack:
    r = _Reader(data)
    if r.take(4) != MAGIC:
        raise PackFormatError("bad magic: not a .lutpack file")
    (version,) = r.unpack("H")
    if version != VERSION:
        raise PackFormatError(f"unknown version {version}")
    variant_code, n_blocks, channels, scale, msb, lsb, index_bits, flags = r.unpack(
        "BHHBBBBI"
    )
    if variant_code not in _VARIANT_NAMES:
        raise PackValidationError(f"unknown variant code {variant_code}")
    shift_raw = r.take(n_blocks * channels * 2)
    shifts = np.frombuffer(shift_raw, dtype=np.int8).reshape(n_blocks, channels, 2).copy()
    (eps,) = r.unpack("f")
    (count,) = r.unpack("I")
    try:
        descriptor = ModelDescriptor(
            variant=_VARIANT_NAMES[variant_code],
            n_blocks=n_blocks,
            channels=channels,
            scale=scale,
            bit_split=BitSplit(msb, lsb),
            index_bits=index_bits,
            residual_flags=tuple(bool(flags >> i & 1) for i in range(3 + 2 * n_blocks)),
            shift_tables=shifts,
        )
    except ValueError as e:
        raise PackValidationError(f"invalid descriptor: {e}") from e
    tables = []
    for _ in range(count):
        role_code, position, in_ch, out_ch, in_bits, stride, n_entries = r.unpack(
            "BBHHBBI"
        )
        if role_code not in _ROLE_NAMES:
            raise PackValidationError(f"unknown role code {role_code}")
        entries = np.frombuffer(r.take(n_entries), dtype=np.int8).copy()
        try:
            tables.append(
                Lut1D(_ROLE_NAMES[role_code], position, in_ch, out_ch, in_bits,
                      stride, entries)
            )
        except ValueError as e:
            raise PackValidationError(f"invalid table record: {e}") from e
    if r.pos != len(data):
        raise PackFormatError(f"{len(data) - r.pos} trailing bytes after last table")
    try:
        return LutPack(descriptor, tables,
                       eas_epsilon=None if math.isnan(eps) else eps)
    except ValueError as e:
        raise PackValidationError(str(e)) from e


def save_pack(pack: LutPack, path):
    with open(path, "wb") as f:
        f.write(serialize(pack))


def load_pack(path) -> LutPack:
    with open(path, "rb") as f:
        return parse(f.read())

"""Model descriptor, 1D lookup tables and the in-memory table pack.

The layer sequence implied by a descriptor is fixed:

    0: conv3x3 on the MSB plane          (1 -> C, indexed with msb_bits)
    1: conv3x3 on the LSB plane          (1 -> C, indexed with lsb_bits)
       -- branch outputs fused by element-wise addition --
    then per Shift-Block: pointwise (C -> C), depthwise 3x3 (C -> C)
    last: pointwise (C -> r^2)
       -- pixel shuffle + rotation ensemble --

Tables are stored in canonical order: layers in the sequence above, and within
a layer by (position, in_channel, out_channel), position being the row-major
3x3 kernel index p = (ky)*3 + kx sampling input offset (dy, dx) = (ky-1, kx-1).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .planes import BitSplit

ROLE_CONV3X3 = "conv3x3"
ROLE_DEPTHWISE = "depthwise"
ROLE_POINTWISE = "pointwise"
ROLES = (ROLE_CONV3X3, ROLE_DEPTHWISE, ROLE_POINTWISE)

VARIANT_BLOCKS = {"S": 0, "M": 1, "L": 7}

MAX_SHIFT = 2
ENTRY_MIN = -128
ENTRY_MAX = 127


@dataclass(frozen=True)
class LayerSpec:
    """Shape contract of one LUT layer slot in the pipeline."""

    role: str
    in_channels: int
    out_channels: int
    in_bits: int
    residual: bool

    @property
    def positions(self) -> int:
        return 9 if self.role in (ROLE_CONV3X3, ROLE_DEPTHWISE) else 1

    @property
    def table_count(self) -> int:
        if self.role == ROLE_DEPTHWISE:
            return self.positions * self.in_channels
        return self.positions * self.in_channels * self.out_channels

    @property
    def terms(self) -> int:
        """Number of summed lookups behind each output scalar."""
        if self.role == ROLE_DEPTHWISE:
            return self.positions
        return self.positions * self.in_channels

    def slots(self):
        """Canonical (position, in_channel, out_channel) iteration order."""
        if self.role == ROLE_DEPTHWISE:
            for p in range(self.positions):
                for c in range(self.in_channels):
                    yield p, c, c
        else:
            for p in range(self.positions):
                for ci in range(self.in_channels):
                    for co in range(self.out_channels):
                        yield p, ci, co


@dataclass
class ModelDescriptor:
    variant: str = "S"
    n_blocks: int = 0
    channels: int = 16
    scale: int = 4
    bit_split: BitSplit = field(default_factory=BitSplit)
    index_bits: int = 6
    residual_flags: tuple = ()
    shift_tables: np.ndarray = None  # (n_blocks, C, 2) int8 (dx, dy)

    def __post_init__(self):
        if self.shift_tables is None:
            self.shift_tables = np.zeros((self.n_blocks, self.channels, 2), np.int8)
        self.shift_tables = np.asarray(self.shift_tables, dtype=np.int8)
        if not self.residual_flags:
            self.residual_flags = default_residual_flags(self.n_blocks)
        self.residual_flags = tuple(bool(f) for f in self.residual_flags)
        self.validate()

    @property
    def n_layers(self) -> int:
        return 3 + 2 * self.n_blocks

    def validate(self):
        if self.variant in VARIANT_BLOCKS and self.n_blocks != VARIANT_BLOCKS[self.variant]:
            raise ValueError(
                f"variant {self.variant} implies {VARIANT_BLOCKS[self.variant]} blocks, "
                f"got {self.n_blocks}"
            )
        if self.variant not in VARIANT_BLOCKS and self.variant != "custom":
            raise ValueError(f"unknown variant {self.variant!r}")
        if self.n_blocks < 0:
            raise ValueError("n_blocks must be >= 0")
        if self.channels < 1 or self.scale < 1:
            raise ValueError("channels and scale must be >= 1")
        if self.index_bits < 1 or self.index_bits > 8:
            raise ValueError("index_bits must be in [1, 8]")
        if self.shift_tables.shape != (self.n_blocks, self.channels, 2):
            raise ValueError(
                f"shift_tables must be ({self.n_blocks}, {self.channels}, 2), "
                f"got {self.shift_tables.shape}"
            )
        if self.shift_tables.size and np.abs(self.shift_tables).max() > MAX_SHIFT:
            raise ValueError(f"shift offsets exceed |{MAX_SHIFT}|")
        if len(self.residual_flags) != self.n_layers:
            raise ValueError(
                f"need {self.n_layers} residual flags, got {len(self.residual_flags)}"
            )
        for spec in self.layer_specs():
            if spec.residual and spec.in_channels != spec.out_channels:
                raise ValueError("residual requires matching in/out channels")

    def layer_specs(self) -> list[LayerSpec]:
        c, r = self.channels, self.scale
        flags = self.residual_flags
        specs = [
            LayerSpec(ROLE_CONV3X3, 1, c, self.bit_split.msb_bits, flags[0]),
            LayerSpec(ROLE_CONV3X3, 1, c, self.bit_split.lsb_bits, flags[1]),
        ]
        for b in range(self.n_blocks):
            specs.append(LayerSpec(ROLE_POINTWISE, c, c, self.index_bits, flags[2 + 2 * b]))
            specs.append(LayerSpec(ROLE_DEPTHWISE, c, c, self.index_bits, flags[3 + 2 * b]))
        specs.append(LayerSpec(ROLE_POINTWISE, c, r * r, self.index_bits, flags[-1]))
        return specs

    def table_count(self) -> int:
        return sum(s.table_count for s in self.layer_specs())

    def __eq__(self, other):
        if not isinstance(other, ModelDescriptor):
            return NotImplemented
        return (
            self.variant == other.variant
            and self.n_blocks == other.n_blocks
            and self.channels == other.channels
            and self.scale == other.scale
            and self.bit_split == other.bit_split
            and self.index_bits == other.index_bits
            and self.residual_flags == other.residual_flags
            and np.array_equal(self.shift_tables, other.shift_tables)
        )


def default_residual_flags(n_blocks: int) -> tuple:
    """Residual lookups on inside Shift-Blocks, off for the feature-extraction
    convs and the channel-changing final pointwise."""
    return (False, False) + (True, True) * n_blocks + (False,)


def make_descriptor(variant="S", channels=16, scale=4, **kw) -> ModelDescriptor:
    if variant not in VARIANT_BLOCKS:
        raise ValueError(f"variant must be one of {sorted(VARIANT_BLOCKS)}")
    return ModelDescriptor(
        variant=variant,
        n_blocks=VARIANT_BLOCKS[variant],
        channels=channels,
        scale=scale,
        **kw,
    )


def stride1_entry_count(in_bits: int) -> int:
    return 1 << in_bits


def sampled_entry_count(in_bits: int, stride: int) -> int:
    """Entries kept at a power-of-two stride: the sampled grid plus the top
    endpoint, (2^b)/s + 1."""
    if stride == 1:
        return stride1_entry_count(in_bits)
    return (1 << in_bits) // stride + 1


@dataclass
class Lut1D:
    """One scalar mapping stored as int8 entries over a 2^in_bits domain."""

    role: str
    position: int
    in_channel: int
    out_channel: int
    in_bits: int
    stride: int
    entries: np.ndarray

    def __post_init__(self):
        self.entries = np.asarray(self.entries, dtype=np.int8)
        self.validate()

    def validate(self):
        if self.role not in ROLES:
            raise ValueError(f"unknown role {self.role!r}")
        if self.stride < 1 or (self.stride & (self.stride - 1)) != 0:
            raise ValueError("stride must be a positive power of two")
        if self.stride > (1 << self.in_bits):
            raise ValueError("stride exceeds the index domain")
        expect = sampled_entry_count(self.in_bits, self.stride)
        if self.entries.shape != (expect,):
            raise ValueError(
                f"{self.role} table at stride {self.stride} over {self.in_bits} bits "
                f"needs {expect} entries, got {self.entries.shape}"
            )

    def __eq__(self, other):
        if not isinstance(other, Lut1D):
            return NotImplemented
        return (
            self.role == other.role
            and self.position == other.position
            and self.in_channel == other.in_channel
            and self.out_channel == other.out_channel
            and self.in_bits == other.in_bits
            and self.stride == other.stride
            and np.array_equal(self.entries, other.entries)
        )


@dataclass
class LutPack:
    """A complete serializable model: descriptor plus tables in canonical order."""

    descriptor: ModelDescriptor
    tables: list
    eas_epsilon: float | None = None

    def __post_init__(self):
        if self.eas_epsilon is not None:
            # Stored as IEEE-754 float32 on disk; coerce so round-trips are exact.
            self.eas_epsilon = float(np.float32(self.eas_epsilon))
        self.validate()

    def validate(self):
        specs = self.descriptor.layer_specs()
        expected = sum(s.table_count for s in specs)
        if len(self.tables) != expected:
            raise ValueError(f"descriptor implies {expected} tables, got {len(self.tables)}")
        i = 0
        for spec in specs:
            for p, ci, co in spec.slots():
                t = self.tables[i]
                i += 1
                if (t.role, t.position, t.in_channel, t.out_channel) != (spec.role, p, ci, co):
                    raise ValueError(
                        f"table {i - 1} out of canonical order: expected "
                        f"{(spec.role, p, ci, co)}, got "
                        f"{(t.role, t.position, t.in_channel, t.out_channel)}"
                    )
                if t.in_bits != spec.in_bits:
                    raise ValueError(
                        f"table {i - 1} has in_bits {t.in_bits}, layer needs {spec.in_bits}"
                    )

    def layer_tables(self) -> list:
        """Tables grouped per layer, canonical order preserved."""
        groups = []
        i = 0
        for spec in self.descriptor.layer_specs():
            n = spec.table_count
            groups.append((spec, self.tables[i : i + n]))
            i += n
        return groups

    def __eq__(self, other):
        if not isinstance(other, LutPack):
            return NotImplemented
        eps_equal = (
            (self.eas_epsilon is None and other.eas_epsilon is None)
            or (
                self.eas_epsilon is not None
                and other.eas_epsilon is not None
                and self.eas_epsilon == other.eas_epsilon
            )
        )
        return (
            eps_equal
            and self.descriptor == other.descriptor
            and len(self.tables) == len(other.tables)
            and all(a == b for a, b in zip(self.tables, other.tables))
        )

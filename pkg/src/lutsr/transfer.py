"""Exhaustive enumeration of unit-function domains into stride-1 tables."""

from __future__ import annotations

import numpy as np

from .model import Lut1D, LutPack
from .refnet import ReferenceNet, UnitFunction, eval_unit, quantize_unit_output


def transfer_unit(f: UnitFunction, in_bits: int) -> np.ndarray:
    """Sample f at every index of its 2^b domain into int8 entries."""
    idx = np.arange(1 << in_bits, dtype=np.float64)
    return quantize_unit_output(eval_unit(f, idx, in_bits)).astype(np.int8)


def transfer_model(net: ReferenceNet) -> LutPack:
    """Convert every unit function into a stride-1 table; descriptor and shift
    tables are copied verbatim. Exact by construction: the full 1D domain of
    each function is enumerated."""
    if net.symmetric:
        raise ValueError("symmetric diagnostic nets are not deployable")
    tables = []
    for layer in net.layers:
        spec = layer.spec
        for p, ci, co in spec.slots():
            entries = transfer_unit(layer.unit_at(p, ci, co), spec.in_bits)
            tables.append(
                Lut1D(spec.role, p, ci, co, spec.in_bits, 1, entries)
            )
    return LutPack(net.descriptor, tables)

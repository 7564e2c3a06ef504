import numpy as np
import pytest

from lutsr.model import make_descriptor
from lutsr.refnet import UnitFunction, make_reference_net
from lutsr.transfer import transfer_model, transfer_unit


def test_identity_table_six_bit():
    entries = transfer_unit(UnitFunction("identity"), 6)
    assert entries.dtype == np.int8
    assert entries.tolist() == list(range(64))


def test_affine_3x_saturates_at_127():
    entries = transfer_unit(UnitFunction("affine", (3.0, 0.0)), 6)
    assert entries[42] == 126
    assert all(entries[i] == 127 for i in range(43, 64))
    assert all(entries[i] == 3 * i for i in range(43))


def test_seeded_poly_matches_direct_evaluation():
    coeffs = (12.5, -30.0, 14.0, 9.5)
    entries = transfer_unit(UnitFunction("clamped-poly", coeffs), 6)
    for i in range(64):
        t = i / 63.0
        val = coeffs[0] + coeffs[1] * t + coeffs[2] * t**2 + coeffs[3] * t**3
        val = min(max(val, -127.0), 127.0)
        rounded = int(np.floor(abs(val) + 0.5)) * (1 if val > 0 else -1 if val < 0 else 0)
        expect = min(max(rounded, -128), 127)
        assert entries[i] == expect, i


def test_transfer_unit_exhaustive_for_every_bit_width():
    f = UnitFunction("affine", (1.5, -20.0))
    for b in (2, 6, 8):
        entries = transfer_unit(f, b)
        assert entries.shape == (1 << b,)
        idx = np.arange(1 << b)
        expect = np.clip(np.floor(np.abs(1.5 * idx - 20) + 0.5)
                         * np.sign(1.5 * idx - 20), -128, 127)
        assert np.array_equal(entries, expect.astype(np.int8))


def test_transfer_model_identity_pack():
    net = make_reference_net(make_descriptor("S", channels=4, scale=2), seed=0,
                             identity=True)
    pack = transfer_model(net)
    for t in pack.tables:
        assert np.array_equal(t.entries, np.arange(1 << t.in_bits))


def test_table_count_matches_descriptor_arithmetic():
    for variant, channels, scale in (("S", 16, 4), ("M", 8, 2), ("L", 4, 3)):
        d = make_descriptor(variant, channels=channels, scale=scale)
        net = make_reference_net(d, seed=1)
        pack = transfer_model(net)
        n = d.n_blocks
        c, r = channels, scale
        # two 3x3 layers with 1 input plane, per block C^2 + 9C, final C*r^2
        expect = 9 * c + 9 * c + n * (c * c + 9 * c) + c * r * r
        assert len(pack.tables) == expect
        assert d.table_count() == expect


def test_transferred_pack_copies_descriptor_and_shifts():
    from lutsr.refnet import random_reference_net

    net = random_reference_net("M", seed=9, channels=4, scale=2)
    pack = transfer_model(net)
    assert pack.descriptor == net.descriptor
    assert np.array_equal(pack.descriptor.shift_tables, net.descriptor.shift_tables)
    assert all(t.stride == 1 for t in pack.tables)
    assert pack.eas_epsilon is None


def test_transfer_rejects_symmetric_diagnostic_net():
    net = make_reference_net(make_descriptor("M", channels=2, scale=1), seed=0,
                             symmetric_lsb=True)
    with pytest.raises(ValueError):
        transfer_model(net)

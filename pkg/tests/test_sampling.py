import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from lutsr.engine import OpCounter, forward, lut_query
from lutsr.model import Lut1D, make_descriptor
from lutsr.refnet import make_reference_net, random_reference_net
from lutsr.sampling import (
    build_buffer,
    cached_forward,
    compress_pack,
    interp_error,
    search_stride,
    stride_candidates,
    subsample_table,
    uniform_compress,
)
from lutsr.transfer import transfer_model


def _table(entries, in_bits=6):
    return Lut1D("pointwise", 0, 0, 0, in_bits, 1, np.asarray(entries, np.int8))


ALT_3BIT = _table([0, 4, 0, 4, 0, 4, 0, 4], in_bits=3)


def _interp_error_oracle(entries, in_bits, stride):
    """Brute-force scalar re-implementation of the weighted error."""
    if stride == 1:
        return 0.0
    n = 1 << in_bits
    positions = list(range(0, n, stride)) + [n - 1]
    samples = [int(entries[p]) for p in positions]
    total = 0.0
    for i in range(n):
        q, w = divmod(i, stride)
        span = stride - 1 if q == len(samples) - 2 else stride
        num = (span - w) * samples[q] + w * samples[q + 1]
        mag = (abs(num) + span // 2) // span
        approx = mag if num >= 0 else -mag
        total += abs(approx - int(entries[i]))
    return stride / (stride - 1) * (total / n)


def test_worked_value_alternating_table():
    assert interp_error(ALT_3BIT, 2) == 3.0
    assert _interp_error_oracle(ALT_3BIT.entries, 3, 2) == 3.0


def test_error_zero_for_identity_any_stride():
    ident = _table(np.arange(64))
    for s in stride_candidates(6):
        assert interp_error(ident, s) == 0.0


def test_error_stride1_zero_by_convention():
    rng = np.random.default_rng(0)
    t = _table(rng.integers(-128, 128, 64))
    assert interp_error(t, 1) == 0.0


@given(st.integers(0, 2**32 - 1), st.sampled_from([2, 3, 6]))
@settings(max_examples=80)
def test_error_matches_bruteforce_oracle(seed, bits):
    rng = np.random.default_rng(seed)
    t = _table(rng.integers(-128, 128, 1 << bits), in_bits=bits)
    for s in stride_candidates(bits):
        assert interp_error(t, s) == pytest.approx(
            _interp_error_oracle(t.entries, bits, s), abs=1e-12
        )


def test_error_rejects_non_power_of_two():
    with pytest.raises(ValueError):
        interp_error(_table(np.arange(64)), 3)


def test_search_identity_reaches_cap():
    ident = _table(np.arange(64))
    assert search_stride(ident, 0.4) == 64
    assert search_stride(ident, 0.4, k_max=4) == 16


def test_search_alternating_stays_at_one():
    assert search_stride(ALT_3BIT, 0.4) == 1


def test_search_unbounded_tolerance():
    rng = np.random.default_rng(1)
    t = _table(rng.integers(-128, 128, 64))
    assert search_stride(t, 1e6) == 64


def test_search_rejects_nonpositive_tolerance():
    with pytest.raises(ValueError):
        search_stride(ALT_3BIT, 0.0)


def test_search_monotone_in_tolerance():
    rng = np.random.default_rng(2)
    for _ in range(20):
        t = _table(rng.integers(-60, 60, 64))
        chosen = [search_stride(t, eps) for eps in (0.1, 0.4, 0.8, 2.0)]
        assert chosen == sorted(chosen)


def test_subsample_keeps_grid_plus_endpoint():
    t = _table(np.arange(64))
    sub = subsample_table(t, 4)
    assert sub.stride == 4
    assert sub.entries.shape == (17,)
    assert sub.entries[-1] == 63 and sub.entries[-2] == 60


def test_compress_identity_pack_max_stride():
    d = make_descriptor("S", channels=3, scale=2)
    pack = transfer_model(make_reference_net(d, seed=0, identity=True))
    comp = compress_pack(pack, 0.4)
    assert comp.eas_epsilon == pytest.approx(0.4)
    for t in comp.tables:
        assert t.stride == 1 << t.in_bits
        assert t.entries.shape == ((1 << t.in_bits) // t.stride + 1,)


def test_compress_tiny_tolerance_keeps_tables_verbatim():
    # alternating entries make every stride > 1 fail, so the pack is
    # byte-identical apart from the recorded tolerance
    net = make_reference_net(make_descriptor("S", channels=3, scale=2), seed=6)
    pack = transfer_model(net)
    for t in pack.tables:
        n = t.entries.shape[0]
        t.entries = np.where(np.arange(n) % 2 == 0, -100, 100).astype(np.int8)
    comp = compress_pack(pack, 1e-9)
    assert comp.eas_epsilon == pytest.approx(1e-9)
    for a, b in zip(pack.tables, comp.tables):
        assert b.stride == 1 and np.array_equal(a.entries, b.entries)


def test_compress_bound_soundness_mixed_pack():
    net = make_reference_net(make_descriptor("M", channels=4, scale=2), seed=11)
    pack = transfer_model(net)
    eps = 0.4
    comp = compress_pack(pack, eps)
    strides = set()
    for orig, sub in zip(pack.tables, comp.tables):
        strides.add(sub.stride)
        assert interp_error(orig, sub.stride) < eps
        for s in stride_candidates(orig.in_bits):
            if s > sub.stride:
                assert interp_error(orig, s) >= eps
    assert len(strides) > 1  # genuinely mixed


def test_compress_requires_stride1_input():
    net = make_reference_net(make_descriptor("S", channels=2, scale=1), seed=0,
                             identity=True)
    comp = compress_pack(transfer_model(net), 0.4)
    with pytest.raises(ValueError):
        compress_pack(comp, 0.4)


def test_buffer_matches_table_verbatim_at_stride1():
    rng = np.random.default_rng(3)
    t = _table(rng.integers(-128, 128, 64))
    assert np.array_equal(build_buffer(t), t.entries.astype(np.int64))


def test_buffer_exhaustive_stride2_identity():
    sub = subsample_table(_table(np.arange(64)), 2)
    assert np.array_equal(build_buffer(sub), np.arange(64))


def test_buffer_six_bit_size():
    for stride in (1, 2, 8, 64):
        sub = subsample_table(_table(np.arange(64)), stride)
        assert build_buffer(sub).shape == (64,)


def test_buffer_equals_query_everywhere():
    rng = np.random.default_rng(4)
    t = _table(rng.integers(-128, 128, 64))
    for s in (2, 8, 32):
        sub = subsample_table(t, s)
        buf = build_buffer(sub)
        for i in range(64):
            assert buf[i] == lut_query(sub, i)


def test_cached_forward_equals_forward():
    rng = np.random.default_rng(5)
    for seed, eps in ((0, 0.4), (1, 0.8), (2, 0.1)):
        net = random_reference_net("M" if seed % 2 else "S", seed=seed, channels=4,
                                   scale=2)
        pack = compress_pack(transfer_model(net), eps)
        for _ in range(3):
            h, w = rng.integers(1, 13, 2)
            img = rng.integers(0, 256, (h, w)).astype(np.uint8)
            assert np.array_equal(cached_forward(pack, img), forward(pack, img))


def test_cached_forward_equals_forward_stride1():
    net = random_reference_net("S", seed=7, channels=4, scale=2)
    pack = transfer_model(net)
    img = np.random.default_rng(6).integers(0, 256, (5, 5)).astype(np.uint8)
    assert np.array_equal(cached_forward(pack, img), forward(pack, img))


def test_cached_path_does_strictly_less_per_pixel_work():
    net = make_reference_net(make_descriptor("S", channels=4, scale=2), seed=0,
                             identity=True)
    pack = compress_pack(transfer_model(net), 0.4)  # identical tables, max stride
    img = np.random.default_rng(7).integers(0, 256, (6, 6)).astype(np.uint8)
    ci = OpCounter()
    forward(pack, img, counter=ci)
    cc = OpCounter()
    cached_forward(pack, img, counter=cc)
    assert cc.queries == ci.queries
    assert cc.buffer_reads == cc.queries  # exactly one read per (LUT, pixel)
    assert cc.interp_ops == 0
    assert ci.interp_ops >= 3 * ci.queries  # >= 3 arithmetic terms per query
    assert ci.table_reads == 2 * ci.queries
    per_pixel_cached = cc.buffer_reads / cc.queries
    assert per_pixel_cached == 1.0


def test_uniform_compress_stride2_halving():
    net = make_reference_net(make_descriptor("S", channels=3, scale=2), seed=9)
    pack = transfer_model(net)
    comp = uniform_compress(pack, 2)
    total = sum(t.entries.shape[0] for t in pack.tables)
    total2 = sum(t.entries.shape[0] for t in comp.tables)
    assert total2 == total // 2 + len(pack.tables)

#!/usr/bin/env python3
"""Storage/runtime sweep: adaptive stride selection vs fixed uniform strides
on one model, printed as a table. The storage column is analytic byte
accounting; the runtime columns are measured on a 320x180 input.

    python3 scripts/compression_sweep.py --variant L --quick
"""

import argparse
import sys
import time
from pathlib import Path

import numpy as np

sys.path.insert(0, str(Path(__file__).resolve().parent.parent / "src"))

from lutsr import metrics
from lutsr.engine import forward
from lutsr.refnet import random_reference_net
from lutsr.sampling import cached_forward, compress_pack, uniform_compress
from lutsr.transfer import transfer_model


def measure(pack, img, quick):
    if quick:
        return float("nan"), float("nan")
    cached_forward(pack, img)  # warm
    t0 = time.perf_counter()
    cached_forward(pack, img)
    tc = time.perf_counter() - t0
    t0 = time.perf_counter()
    forward(pack, img)
    ti = time.perf_counter() - t0
    return tc, ti


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--variant", default="M", choices=["S", "M", "L"])
    ap.add_argument("--seed", type=int, default=1)
    ap.add_argument("--quick", action="store_true", help="skip timing runs")
    args = ap.parse_args()

    net = random_reference_net(args.variant, args.seed)
    base = transfer_model(net)
    img = np.random.default_rng(0).integers(0, 256, (180, 320)).astype(np.uint8)

    rows = [("uncompressed", base)]
    for s in (2, 4):
        rows.append((f"uniform s={s}", uniform_compress(base, s)))
    for eps in (0.4, 0.8):
        rows.append((f"adaptive eps={eps}", compress_pack(base, eps)))

    print(f"variant {args.variant}, seed {args.seed}, input 320x180")
    print(f"{'configuration':<20}{'entries KiB':>12}{'ratio':>8}"
          f"{'cached ms':>11}{'interp ms':>11}")
    for name, pack in rows:
        rep = metrics.storage_report(pack)
        tc, ti = measure(pack, img, args.quick)
        print(f"{name:<20}{rep['entry_bytes_total'] / 1024:>12.1f}"
              f"{rep['compression_ratio']:>8.3f}"
              f"{tc * 1e3:>11.0f}{ti * 1e3:>11.0f}")


if __name__ == "__main__":
    main()

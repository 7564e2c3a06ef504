"""Command-line surface binding the engine, compressor, metrics and I/O.

Exit codes: 0 success, 1 usage error, 2 I/O or file-format error,
3 validation failure (e.g. a corrupt pack).
"""

from __future__ import annotations

import argparse
import json
import sys
import time
from pathlib import Path

import numpy as np

from . import engine, imgio, metrics, sampling
from .engine import OpCounter
from .model import VARIANT_BLOCKS
from .packfile import PackFormatError, PackValidationError, load_pack, save_pack
from .refnet import random_reference_net
from .transfer import transfer_model

DEFAULT_EPS = 0.4


class UsageError(Exception):
    pass


class InputError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _build_parser() -> _Parser:
    p = _Parser(prog="lutsr", description=__doc__)
    sub = p.add_subparsers(dest="command", required=True)

    t = sub.add_parser("transfer", help="generate a seeded model and transfer it to tables")
    t.add_argument("--seed", type=int, required=True)
    t.add_argument("--variant", choices=sorted(VARIANT_BLOCKS), required=True)
    t.add_argument("--out", required=True)
    t.add_argument("--channels", type=int, default=16)
    t.add_argument("--scale", type=int, default=4)

    c = sub.add_parser("compress", help="error-bounded adaptive stride compression")
    c.add_argument("--in", dest="infile", required=True)
    c.add_argument("--eps", type=float, default=DEFAULT_EPS)
    c.add_argument("--out", required=True)

    i = sub.add_parser("infer", help="run LUT inference on an image")
    i.add_argument("--model", required=True)
    i.add_argument("--input", required=True)
    i.add_argument("--output", required=True)
    i.add_argument("--no-cache", action="store_true",
                   help="force per-pixel interpolated queries")

    e = sub.add_parser("eval", help="metrics over directories of image pairs")
    e.add_argument("--pred", required=True)
    e.add_argument("--gt", required=True)
    e.add_argument("--metrics", default="psnr,ssim")
    e.add_argument("--json", action="store_true")

    d = sub.add_parser("degrade", help="synthesize a degraded input")
    d.add_argument("--input", required=True)
    d.add_argument("--output", required=True)
    d.add_argument("--mode", required=True, help="bicubic:<r> or gauss:<sigma>")
    d.add_argument("--seed", type=int, default=0)

    r = sub.add_parser("rf", help="receptive field of a variant")
    r.add_argument("--variant", choices=sorted(VARIANT_BLOCKS), required=True)

    b = sub.add_parser("bench", help="cached vs interpolated timing and op counts")
    b.add_argument("--model", required=True)
    b.add_argument("--size", default="320x180")
    b.add_argument("--seed", type=int, default=0)
    b.add_argument("--json", action="store_true")

    s = sub.add_parser("inspect", help="describe a pack file")
    s.add_argument("--model", required=True)
    s.add_argument("--json", action="store_true")
    return p


def _load_image(path):
    try:
        return imgio.load_image(path)
    except (OSError, ValueError) as e:
        raise InputError(f"{path}: {e}") from e


def _infer_image(pack, img, cached: bool):
    run = sampling.cached_forward if cached else engine.forward
    if img.ndim == 2:
        return run(pack, img)
    return np.stack([run(pack, img[..., c]) for c in range(3)], axis=-1)


def _cmd_transfer(args):
    net = random_reference_net(args.variant, args.seed,
                               channels=args.channels, scale=args.scale)
    pack = transfer_model(net)
    save_pack(pack, args.out)
    rep = metrics.storage_report(pack)
    print(f"wrote {args.out}: variant {args.variant}, {rep['table_count']} tables, "
          f"{rep['entry_bytes_total']} entry bytes")
    return 0


def _cmd_compress(args):
    pack = load_pack(args.infile)
    before = metrics.storage_report(pack)
    compressed = sampling.compress_pack(pack, args.eps)
    save_pack(compressed, args.out)
    after = metrics.storage_report(compressed)
    print(f"eps={args.eps}: entry bytes {before['entry_bytes_total']} -> "
          f"{after['entry_bytes_total']} "
          f"(ratio {after['compression_ratio']:.3f})")
    return 0


def _cmd_infer(args):
    pack = load_pack(args.model)
    img = _load_image(args.input)
    out = _infer_image(pack, img, cached=not args.no_cache)
    imgio.save_image(out, args.output)
    print(f"wrote {args.output} ({out.shape[1]}x{out.shape[0]})")
    return 0


_METRIC_FNS = {"psnr": metrics.psnr_y, "ssim": metrics.ssim, "psnrb": metrics.psnr_b}


def _cmd_eval(args):
    names = [m.strip() for m in args.metrics.split(",") if m.strip()]
    for m in names:
        if m not in _METRIC_FNS:
            raise UsageError(f"unknown metric {m!r} (choose from {sorted(_METRIC_FNS)})")
    pred_dir, gt_dir = Path(args.pred), Path(args.gt)
    preds = sorted(p for p in pred_dir.iterdir() if p.suffix.lower() == ".png")
    gts = sorted(p for p in gt_dir.iterdir() if p.suffix.lower() == ".png")
    if not preds or len(preds) != len(gts):
        raise InputError(
            f"need matching nonempty directories: {len(preds)} predictions, "
            f"{len(gts)} references"
        )
    rows = []
    for pp, gp in zip(preds, gts):
        a, b = _load_image(gp), _load_image(pp)
        row = {"pred": pp.name, "gt": gp.name}
        for m in names:
            row[m] = _METRIC_FNS[m](a, b)
        rows.append(row)
    report = {
        "luma": "bt601-full-range",
        "pairs": rows,
        "mean": {
            m: float(np.mean([r[m] for r in rows if np.isfinite(r[m])] or [np.inf]))
            for m in names
        },
    }
    if args.json:
        print(json.dumps(report, indent=2, default=float))
    else:
        print(f"# luma: {report['luma']}")
        header = "pair".ljust(32) + "".join(m.rjust(12) for m in names)
        print(header)
        for r in rows:
            line = f"{r['pred']} vs {r['gt']}"[:32].ljust(32)
            line += "".join(metrics.format_db(r[m]).rjust(12) if m != "ssim"
                            else f"{r[m]:.4f}".rjust(12) for m in names)
            print(line)
        print("mean".ljust(32) + "".join(
            (metrics.format_db(report["mean"][m]) if m != "ssim"
             else f"{report['mean'][m]:.4f}").rjust(12) for m in names))
    return 0


def _cmd_degrade(args):
    img = _load_image(args.input)
    kind, _, param = args.mode.partition(":")
    if kind == "bicubic":
        try:
            factor = int(param)
        except ValueError:
            raise UsageError(f"bicubic mode needs an integer factor, got {param!r}")
        out = imgio.bicubic_downsample(img, factor)
    elif kind == "gauss":
        try:
            sigma = float(param)
        except ValueError:
            raise UsageError(f"gauss mode needs a numeric sigma, got {param!r}")
        out = imgio.add_gaussian_noise(img, sigma, args.seed)
    else:
        raise UsageError(f"unknown degradation mode {args.mode!r}")
    imgio.save_image(out, args.output)
    print(f"wrote {args.output}")
    return 0


def _cmd_rf(args):
    from .model import make_descriptor

    side, _ = metrics.receptive_field(make_descriptor(args.variant))
    print(f"{side}x{side}")
    return 0


def _parse_size(text: str):
    try:
        w, h = text.lower().split("x")
        return int(w), int(h)
    except ValueError:
        raise UsageError(f"size must look like 320x180, got {text!r}")


def _cmd_bench(args):
    pack = load_pack(args.model)
    w, h = _parse_size(args.size)
    rng = np.random.default_rng(args.seed)
    img = rng.integers(0, 256, (h, w)).astype(np.uint8)
    results = {}
    for name, fn in (("interpolated", engine.forward),
                     ("cached", sampling.cached_forward)):
        counter = OpCounter()
        t0 = time.perf_counter()
        out = fn(pack, img, counter=counter)
        dt = time.perf_counter() - t0
        results[name] = {
            "seconds": dt,
            "queries": counter.queries,
            "table_reads": counter.table_reads,
            "buffer_reads": counter.buffer_reads,
            "interp_ops": counter.interp_ops,
            "buffer_build_queries": counter.buffer_build_queries,
            "stages": {k: round(v, 6) for k, v in counter.layer_seconds.items()},
            "checksum": int(out.astype(np.int64).sum()),
        }
    speedup = results["interpolated"]["seconds"] / results["cached"]["seconds"]
    results["speedup"] = speedup
    if args.json:
        print(json.dumps(results, indent=2))
    else:
        for name in ("interpolated", "cached"):
            r = results[name]
            print(f"{name}: {r['seconds']:.3f}s  queries={r['queries']}  "
                  f"table_reads={r['table_reads']}  buffer_reads={r['buffer_reads']}  "
                  f"interp_ops={r['interp_ops']}")
            for stage, secs in r["stages"].items():
                print(f"  {stage}: {secs:.4f}s")
        print(f"speedup (interpolated/cached): {speedup:.2f}x")
    if results["interpolated"]["checksum"] != results["cached"]["checksum"]:
        print("error: cached and interpolated outputs differ", file=sys.stderr)
        return 3
    return 0


def _cmd_inspect(args):
    pack = load_pack(args.model)
    d = pack.descriptor
    rep = metrics.storage_report(pack)
    strides = sorted({t.stride for t in pack.tables})
    info = {
        "variant": d.variant,
        "n_blocks": d.n_blocks,
        "channels": d.channels,
        "scale": d.scale,
        "bit_split": [d.bit_split.msb_bits, d.bit_split.lsb_bits],
        "index_bits": d.index_bits,
        "residual_flags": list(d.residual_flags),
        "shift_tables": d.shift_tables.tolist(),
        "eas_epsilon": pack.eas_epsilon,
        "table_count": rep["table_count"],
        "strides": strides,
        "entry_bytes_total": rep["entry_bytes_total"],
    }
    if args.json:
        print(json.dumps(info, indent=2))
    else:
        for k, v in info.items():
            if k == "shift_tables":
                v = f"{d.shift_tables.shape} offsets in [{d.shift_tables.min() if d.shift_tables.size else 0}, {d.shift_tables.max() if d.shift_tables.size else 0}]"
            print(f"{k}: {v}")
    return 0


_COMMANDS = {
    "transfer": _cmd_transfer,
    "compress": _cmd_compress,
    "infer": _cmd_infer,
    "eval": _cmd_eval,
    "degrade": _cmd_degrade,
    "rf": _cmd_rf,
    "bench": _cmd_bench,
    "inspect": _cmd_inspect,
}


def run_cli(argv) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
        return _COMMANDS[args.command](args)
    except UsageError as e:
        print(f"usage error: {e}", file=sys.stderr)
        return 1
    except SystemExit as e:  # argparse -h
        return int(e.code or 0)
    except (PackFormatError, InputError, FileNotFoundError, IsADirectoryError,
            NotADirectoryError, PermissionError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 2
    except OSError as e:
        print(f"error: {e}", file=sys.stderr)
        return 2
    except (PackValidationError, ValueError) as e:
        print(f"validation error: {e}", file=sys.stderr)
        return 3


def main():
    sys.exit(run_cli(sys.argv[1:]))


if __name__ == "__main__":
    main()

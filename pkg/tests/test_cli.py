import json

import numpy as np
import pytest

from lutsr import imgio
from lutsr.cli import run_cli
from lutsr.packfile import load_pack, serialize


@pytest.fixture
def model_path(tmp_path):
    path = tmp_path / "model.lutpack"
    rc = run_cli(["transfer", "--seed", "3", "--variant", "S", "--channels", "4",
                  "--scale", "2", "--out", str(path)])
    assert rc == 0
    return path


def test_rf_prints_table_values(capsys):
    for variant, side in (("S", 9), ("M", 17), ("L", 65)):
        assert run_cli(["rf", "--variant", variant]) == 0
        assert capsys.readouterr().out.strip() == f"{side}x{side}"


def test_usage_errors_exit_1(capsys):
    assert run_cli(["rf"]) == 1
    assert run_cli(["no-such-command"]) == 1
    assert run_cli([]) == 1
    assert run_cli(["infer", "--model", "x"]) == 1


def test_transfer_deterministic(tmp_path):
    a, b = tmp_path / "a.lutpack", tmp_path / "b.lutpack"
    run_cli(["transfer", "--seed", "9", "--variant", "S", "--channels", "4",
             "--scale", "2", "--out", str(a)])
    run_cli(["transfer", "--seed", "9", "--variant", "S", "--channels", "4",
             "--scale", "2", "--out", str(b)])
    assert a.read_bytes() == b.read_bytes()


def test_compress_defaults_to_paper_tolerance(model_path, tmp_path, capsys):
    out = tmp_path / "c.lutpack"
    assert run_cli(["compress", "--in", str(model_path), "--out", str(out)]) == 0
    assert "eps=0.4" in capsys.readouterr().out
    assert load_pack(out).eas_epsilon == pytest.approx(0.4)


def test_infer_scales_output(model_path, tmp_path, capsys):
    img = np.random.default_rng(0).integers(0, 256, (48, 48)).astype(np.uint8)
    imgio.save_image(img, tmp_path / "in.png")
    rc = run_cli(["infer", "--model", str(model_path), "--input",
                  str(tmp_path / "in.png"), "--output", str(tmp_path / "out.png")])
    assert rc == 0
    assert imgio.load_image(tmp_path / "out.png").shape == (96, 96)


def test_infer_cache_flag_byte_identical(model_path, tmp_path):
    comp = tmp_path / "c.lutpack"
    run_cli(["compress", "--in", str(model_path), "--out", str(comp)])
    img = np.random.default_rng(1).integers(0, 256, (9, 7)).astype(np.uint8)
    imgio.save_image(img, tmp_path / "in.png")
    run_cli(["infer", "--model", str(comp), "--input", str(tmp_path / "in.png"),
             "--output", str(tmp_path / "a.png")])
    run_cli(["infer", "--model", str(comp), "--input", str(tmp_path / "in.png"),
             "--output", str(tmp_path / "b.png"), "--no-cache"])
    assert (tmp_path / "a.png").read_bytes() == (tmp_path / "b.png").read_bytes()


def test_infer_rgb_input(model_path, tmp_path):
    img = np.random.default_rng(2).integers(0, 256, (6, 6, 3)).astype(np.uint8)
    imgio.save_image(img, tmp_path / "in.png")
    rc = run_cli(["infer", "--model", str(model_path), "--input",
                  str(tmp_path / "in.png"), "--output", str(tmp_path / "out.png")])
    assert rc == 0
    assert imgio.load_image(tmp_path / "out.png").shape == (12, 12, 3)


def test_missing_files_exit_2(tmp_path):
    assert run_cli(["infer", "--model", str(tmp_path / "nope.lutpack"),
                    "--input", "x.png", "--output", "y.png"]) == 2
    assert run_cli(["inspect", "--model", str(tmp_path / "nope.lutpack")]) == 2


def test_corrupt_magic_exits_2(model_path, tmp_path):
    bad = tmp_path / "bad.lutpack"
    blob = bytearray(model_path.read_bytes())
    blob[:4] = b"JUNK"
    bad.write_bytes(bytes(blob))
    assert run_cli(["inspect", "--model", str(bad)]) == 2


def test_truncated_pack_exits_2(model_path, tmp_path):
    bad = tmp_path / "short.lutpack"
    bad.write_bytes(model_path.read_bytes()[:40])
    assert run_cli(["inspect", "--model", str(bad)]) == 2


def test_semantically_corrupt_pack_exits_3(model_path, tmp_path):
    pack = load_pack(model_path)
    pack.tables[0].stride = 2  # entry count now inconsistent
    blob = serialize(pack)
    bad = tmp_path / "bad.lutpack"
    bad.write_bytes(blob)
    assert run_cli(["inspect", "--model", str(bad)]) == 3


def test_eval_report(tmp_path, capsys):
    rng = np.random.default_rng(3)
    (tmp_path / "pred").mkdir()
    (tmp_path / "gt").mkdir()
    for i in range(2):
        gt = rng.integers(0, 256, (16, 16)).astype(np.uint8)
        pred = np.clip(gt.astype(int) + rng.integers(-4, 5, gt.shape), 0, 255).astype(np.uint8)
        imgio.save_image(gt, tmp_path / "gt" / f"{i}.png")
        imgio.save_image(pred, tmp_path / "pred" / f"{i}.png")
    rc = run_cli(["eval", "--pred", str(tmp_path / "pred"), "--gt", str(tmp_path / "gt"),
                  "--metrics", "psnr,ssim,psnrb", "--json"])
    assert rc == 0
    report = json.loads(capsys.readouterr().out)
    assert report["luma"] == "bt601-full-range"
    assert len(report["pairs"]) == 2
    for m in ("psnr", "ssim", "psnrb"):
        assert m in report["mean"]


def test_eval_unknown_metric_exits_1(tmp_path):
    (tmp_path / "p").mkdir()
    (tmp_path / "g").mkdir()
    assert run_cli(["eval", "--pred", str(tmp_path / "p"), "--gt", str(tmp_path / "g"),
                    "--metrics", "lpips"]) == 1


def test_degrade_modes(tmp_path):
    img = np.random.default_rng(4).integers(0, 256, (16, 16)).astype(np.uint8)
    imgio.save_image(img, tmp_path / "in.png")
    assert run_cli(["degrade", "--input", str(tmp_path / "in.png"), "--output",
                    str(tmp_path / "lr.png"), "--mode", "bicubic:4"]) == 0
    assert imgio.load_image(tmp_path / "lr.png").shape == (4, 4)
    assert run_cli(["degrade", "--input", str(tmp_path / "in.png"), "--output",
                    str(tmp_path / "noisy.png"), "--mode", "gauss:15", "--seed", "5"]) == 0
    assert run_cli(["degrade", "--input", str(tmp_path / "in.png"), "--output",
                    str(tmp_path / "x.png"), "--mode", "blur:3"]) == 1


def test_bench_reports_counts_and_speedup(model_path, tmp_path, capsys):
    comp = tmp_path / "c.lutpack"
    run_cli(["compress", "--in", str(model_path), "--out", str(comp)])
    capsys.readouterr()  # drain the compress summary
    rc = run_cli(["bench", "--model", str(comp), "--size", "24x16", "--json"])
    assert rc == 0
    report = json.loads(capsys.readouterr().out)
    assert report["cached"]["buffer_reads"] == report["cached"]["queries"]
    assert report["interpolated"]["queries"] == report["cached"]["queries"]
    assert report["cached"]["checksum"] == report["interpolated"]["checksum"]
    assert "speedup" in report


def test_inspect_reports_descriptor(model_path, capsys):
    assert run_cli(["inspect", "--model", str(model_path), "--json"]) == 0
    info = json.loads(capsys.readouterr().out)
    assert info["variant"] == "S"
    assert info["channels"] == 4
    assert info["scale"] == 2
    assert info["eas_epsilon"] is None

"""Test the bench command line end to end on short runs."""

import sys
import os
import csv
import json
import tempfile

import numpy as np
import pytest

# Add src to path for testing
sys.path.insert(0, os.path.join(os.path.dirname(__file__), '..', 'src'))

import bench.cli as cli  # noqa: E402
from bench.cli import build_parser, main, parse_levels  # noqa: E402
from core.model import Action  # noqa: E402
from qnet.slimmable import load_checkpoint  # noqa: E402


def _config(tmp):
    path = os.path.join(tmp, "config.json")
    with open(path, "w", encoding="utf-8") as f:
        json.dump({"agent": {"warmup": 16, "batch_size": 8, "iterations": 40}}, f)
    return path


def test_parser_and_levels():
    args = build_parser().parse_args(["eval", "--governor", "fixed", "--out", "x"])
    assert args.frames is None and args.seed == 0
    assert parse_levels("2,3") == Action(2, 3)
    assert main(["eval", "--governor", "fixed", "--levels", "a,b", "--out", "x"]) == 1
    print("[OK] Parser and level parsing")


def test_calibrate_writes_profile():
    with tempfile.TemporaryDirectory() as tmp:
        out = os.path.join(tmp, "calibrated.json")
        assert main(["calibrate", "--out", out]) == 0
        with open(out, encoding="utf-8") as f:
            doc = json.load(f)
    assert doc["latency"]["stage1_gpu_gcycles"] > 0
    assert doc["name"] == "jetson-fasterrcnn-kitti"
    print("[OK] calibrate")


def test_train_eval_report():
    with tempfile.TemporaryDirectory() as tmp:
        cfg = _config(tmp)
        ckpt = os.path.join(tmp, "sds.npz")
        assert main(["--config", cfg, "train", "--frames", "30", "--seed", "1",
                     "--out", ckpt]) == 0
        net, _, meta = load_checkpoint(ckpt)
        assert meta["variant"] == "sds" and 0 < meta["iterations"] <= 40
        with open(os.path.join(tmp, "sds.csv"), encoding="utf-8") as f:
            assert len(list(csv.reader(f))) == 31

        runs = []
        for gov, extra in (("sds", ["--checkpoint", ckpt]), ("fixed", ["--levels", "2,2"])):
            out = os.path.join(tmp, f"eval-{gov}")
            assert main(["--config", cfg, "eval", "--governor", gov, *extra,
                         "--frames", "25", "--seed", "2", "--out", out]) == 0
            runs.append(out)
        with open(os.path.join(runs[0], "metrics.json"), encoding="utf-8") as f:
            summary = json.load(f)
        assert summary["overhead_ms"] == 2 * (2 * 1.92 + 0.42)
        assert summary["frames"] == 25

        assert main(["report", "--in", *runs, "--out", os.path.join(tmp, "report")]) == 0
        with open(os.path.join(tmp, "report", "comparison.csv"), encoding="utf-8") as f:
            rows = list(csv.DictReader(f))
        assert [r["governor"] for r in rows] == ["sds", "fixed"]
        assert np.isfinite(float(rows[0]["objective"]))

        assert main(["eval", "--governor", "sds", "--out", os.path.join(tmp, "x")]) == 1
        assert main(["eval", "--governor", "ztt", "--checkpoint", os.path.join(tmp, "none.npz"),
                     "--out", os.path.join(tmp, "y")]) == 1
        assert main(["report", "--in", os.path.join(tmp, "missing"),
                     "--out", os.path.join(tmp, "z")]) == 1
    print("[OK] train, eval and report from the command line")


def test_serve_device_overhead_follows_agent_variant():
    seen, stored = [], []

    def local_client(device, profile_name, frames, **kwargs):
        seen.append(device.overhead.total_ms)
        return [device.step(lambda obs: Action(2, 2)) for _ in range(frames)]

    saved = (cli.run_device_client, cli.persist_run, cli.FrameMetrics.serve)
    cli.run_device_client = local_client
    cli.persist_run = lambda run_id, governor, rows: stored.append((run_id, governor, rows))
    cli.FrameMetrics.serve = lambda self, port: None
    try:
        assert main(["serve-device", "--governor", "ztt", "--frames", "3", "--db"]) == 0
        assert main(["serve-device", "--frames", "3"]) == 0
    finally:
        cli.run_device_client, cli.persist_run, cli.FrameMetrics.serve = saved

    assert seen[0] == pytest.approx(2 * 1.92 + 0.42)
    assert seen[1] == pytest.approx(2 * (2 * 1.92 + 0.42))
    assert len(stored) == 1
    run_id, governor, rows = stored[0]
    assert governor == "ztt" and run_id.startswith("remote-ztt-")
    assert [r["frame"] for r in rows] == [0, 1, 2]
    assert rows[0]["cpu_level_b"] == 2
    print("[OK] serve-device overhead and database rows")


if __name__ == "__main__":
    test_parser_and_levels()
    test_calibrate_writes_profile()
    test_train_eval_report()
    test_serve_device_overhead_follows_agent_variant()

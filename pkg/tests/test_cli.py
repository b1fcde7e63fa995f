import csv
import json
import subprocess
import sys

import pytest

from catchsim.harness.cli import main
from catchsim.models import build_interceptor
from catchsim.nn import save_weights


def _run(*args):
    return main([str(a) for a in args])


def test_usage_errors(tmp_path, capsys):
    with pytest.raises(SystemExit) as e:
        main(["no-such-command"])
    assert e.value.code == 1
    with pytest.raises(SystemExit) as e:
        main(["eval", "--throws", "abc"])
    assert e.value.code == 1
    with pytest.raises(SystemExit) as e:
        main([])
    assert e.value.code == 1
    assert _run("eval", "--pipeline", "color+magic", "--out", tmp_path) == 1
    assert _run("eval", "--throws", "0", "--out", tmp_path) == 1
    assert _run("eval", "--pipeline", "color+cnn", "--out", tmp_path) == 1  # no weights
    assert _run("eval", "--config", tmp_path / "missing.json", "--out", tmp_path) == 1
    bad = tmp_path / "bad.pgnn"
    bad.write_bytes(b"nonsense")
    assert _run("eval", "--pipeline", "color+cnn", "--interceptor-weights", bad, "--out", tmp_path) == 1
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"unknown_knob": 1}))
    assert _run("eval", "--config", cfg, "--out", tmp_path) == 1
    assert "error" in capsys.readouterr().err


def test_simulate_outputs(tmp_path):
    out = tmp_path / "sim"
    assert _run("simulate", "--seed", 4, "--out", out) == 0
    trace = (out / "trace.csv").read_text()
    assert trace.startswith("t,x,y,z,vx,vy,vz\n") and "\r" not in trace
    dets = (out / "detections.csv").read_text()
    assert dets.startswith("t,x,y,z,source\n")
    rows = list(csv.DictReader(dets.splitlines()))
    assert {r["source"] for r in rows} <= {"0", "1"}
    for r in rows:
        for k in "txyz":
            assert len(r[k].lstrip("-").replace(".", "").lstrip("0").split("e")[0]) <= 9
    summary = json.loads((out / "summary.json").read_text())
    assert summary["pipeline"] == "color+ballistic" and summary["seed"] == 4
    assert (out / "predictions.csv").read_text().startswith("t,trigger_t,n_points,x,y,t_cross,source\n")


def test_eval_and_check_rate(tmp_path):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"noise": "noiseless", "latency": [0, 0], "throw": {"max_travel": 0.2}}))
    assert _run("eval", "--config", cfg, "--throws", 3, "--out", tmp_path / "a") == 0
    assert _run("eval", "--config", cfg, "--throws", 3, "--out", tmp_path / "b", "--check-rate", 1.0) == 0
    assert _run("eval", "--throws", 3, "--out", tmp_path / "c", "--check-rate", 1.01) == 2
    summary = json.loads((tmp_path / "a" / "summary.json").read_text())
    assert summary["metrics"]["catch_rate"] == 1.0
    assert summary["config"]["noise"] == "noiseless"
    header = (tmp_path / "a" / "episodes.csv").read_text().splitlines()[0]
    assert header.startswith("episode,pipeline,success,miss_distance")


def test_eval_with_interceptor_weights(tmp_path):
    w = tmp_path / "i.pgnn"
    save_weights(build_interceptor(seed=0), w)
    assert _run("eval", "--pipeline", "color+cnn", "--interceptor-weights", w, "--throws", 2,
                "--out", tmp_path / "o") == 0


def test_gen_and_train_interceptor(tmp_path):
    data = tmp_path / "traj"
    assert _run("gen-trajectory-data", "--splits", 6, 2, 2, "--out", data) == 0
    manifest = json.loads((data / "manifest.json").read_text())
    assert manifest["splits"]["train"]["n"] == 6
    out = tmp_path / "model"
    assert _run("train-interceptor", "--data", data, "--epochs", 2, "--augment", 2, "--out", out) == 0
    losses = (out / "losses.csv").read_text().splitlines()
    assert losses[0] == "epoch,train_loss,val_loss" and len(losses) == 3
    assert (out / "interceptor.pgnn").read_bytes()[:4] == b"PGNN"
    assert len(json.loads((out / "summary.json").read_text())["test_rmse"]) == 2
    # two epochs cannot reach the held-out bound
    assert _run("train-interceptor", "--data", data, "--epochs", 1, "--augment", 1, "--check",
                "--out", tmp_path / "m2") == 2


def test_gen_and_train_localizer(tmp_path):
    data = tmp_path / "frames"
    assert _run("gen-localizer-data", "--scale", 0.002, "--out", data) == 0
    assert (data / "train_frames.npy").exists() and (data / "test_labels.csv").exists()
    out = tmp_path / "loc"
    assert _run("train-localizer", "--data", data, "--epochs", 1, "--out", out) == 0
    assert (out / "localizer.pgnn").exists() and (out / "losses.csv").exists()


def test_tof_command(tmp_path):
    assert _run("tof", "--throws", 10, "--out", tmp_path) == 0
    lines = (tmp_path / "tof.csv").read_text().splitlines()
    assert lines[0] == "distance,n,min_ms,max_ms,median_ms,band_lo_ms,band_hi_ms,in_band"
    assert len(lines) == 3
    # a much slower throw pushes the medians out of the band
    cfg = tmp_path / "slow.json"
    cfg.write_text(json.dumps({"throw": {"tof_medians": [1.3, 1.6]}}))
    assert _run("tof", "--throws", 10, "--config", cfg, "--out", tmp_path / "s") == 2


def test_blur_command_without_weights(tmp_path):
    # no CNN rows, so the check cannot pass
    assert _run("blur-study", "--frames", 4, "--blur", 0, 5, "--out", tmp_path) == 0
    assert _run("blur-study", "--frames", 4, "--blur", 0, 5, "--check", "--out", tmp_path) == 2
    assert (tmp_path / "blur.csv").read_text().startswith("blur_px,method,n,n_found,miss_rate,mean_error\n")


def test_module_entry_point():
    r = subprocess.run([sys.executable, "-m", "catchsim", "--help"], capture_output=True, text=True)
    assert r.returncode == 0
    for cmd in ("simulate", "gen-localizer-data", "gen-trajectory-data", "train-localizer", "train-interceptor",
                "eval", "compare", "tof", "blur-study", "gradcheck"):
        assert cmd in r.stdout

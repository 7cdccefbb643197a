import json
import subprocess
import sys

import numpy as np
import pytest

from drfgp.cli import main
from drfgp.data import make_se_stream, write_dataset
from drfgp.metrics import holdout_mse, read_metrics_log

FAST = ["--num-agents", "3", "--rounds", "2", "--num-features", "8", "--holdout-size", "20"]


@pytest.fixture
def csv_path(tmp_path):
    path = tmp_path / "data.csv"
    write_dataset(make_se_stream(120, dim=2, seed=3), path)
    return path


def test_run_then_metrics(tmp_path, csv_path, capsys):
    out = tmp_path / "out"
    rc = main(["run", "--dataset", str(csv_path), "--out", str(out), "--n-max", "5",
               "--snapshot-every", "10", *FAST])
    assert rc == 0
    summary = json.loads((out / "summary.json").read_text())
    assert summary["dataset_shape"] == [120, 2]
    assert summary["num_steps"] == 34
    log = read_metrics_log(out / "metrics.csv")
    assert summary["holdout_mse"] == holdout_mse(log)
    assert (out / "running_mse.csv").read_text().startswith("t,mse\n5,")
    assert (out / "snapshots" / "snapshot_final.npz").exists()
    capsys.readouterr()

    assert main(["metrics", str(out / "metrics.csv"), "--n-max", "5"]) == 0
    text = capsys.readouterr().out
    assert text.splitlines()[1:] == (out / "running_mse.csv").read_text().splitlines()[1:] + [
        f"holdout MSE: {summary['holdout_mse']!r}"
    ]

    assert main(["inspect", str(out / "snapshots" / "snapshot_final.npz")]) == 0
    info = json.loads(capsys.readouterr().out)
    assert info["config_hash"] == summary["config_hash"]


def test_config_file_and_overrides(tmp_path, csv_path):
    cfg = tmp_path / "c.toml"
    cfg.write_text('graph = "ring"\nnum_agents = 4\nlengthscales = [0.5, 2.0]\nseed = 11\n')
    out = tmp_path / "o"
    assert main(["run", "--config", str(cfg), "--dataset", str(csv_path), "--out", str(out),
                 "--num-agents", "2", "--holdout-size", "0", "--num-features", "4"]) == 0
    conf = json.loads((out / "summary.json").read_text())["config"]
    assert conf["graph"] == "ring" and conf["num_agents"] == 2 and conf["seed"] == 11
    assert "holdout_mse" not in json.loads((out / "summary.json").read_text())


def test_repeat_runs_are_byte_identical(tmp_path, csv_path):
    for name in ("a", "b"):
        assert main(["run", "--dataset", str(csv_path), "--out", str(tmp_path / name),
                     "--graph", "random", "--seed", "5", *FAST]) == 0
    a = (tmp_path / "a" / "metrics.csv").read_bytes()
    assert a == (tmp_path / "b" / "metrics.csv").read_bytes()


def test_synthetic_dataset(tmp_path):
    out = tmp_path / "s"
    assert main(["run", "--dataset", "synthetic", "--out", str(out), "--lengthscales", "1,3",
                 "--num-agents", "2", "--num-features", "6", "--holdout-size", "50"]) == 0
    log = read_metrics_log(out / "metrics.csv")
    assert log.num_models == 2 and np.isfinite(holdout_mse(log))


@pytest.mark.parametrize(
    "args, code",
    [
        (["--num-agents", "0"], 2),
        (["--bma-mode", "nope"], 2),
        (["--holdout-size", "1000"], 2),
        (["--target-column", "missing"], 3),
    ],
)
def test_exit_codes(tmp_path, csv_path, args, code, capsys):
    rc = main(["run", "--dataset", str(csv_path), "--out", str(tmp_path / "x"), *args])
    assert rc == code
    assert "drfgp:" in capsys.readouterr().err


def test_bad_data_and_missing_file(tmp_path, capsys):
    bad = tmp_path / "bad.csv"
    bad.write_text("a,b\n1,2\n3,oops\n")
    assert main(["run", "--dataset", str(bad), "--out", str(tmp_path / "x")]) == 3
    assert "line 3" in capsys.readouterr().err
    assert main(["run", "--dataset", str(tmp_path / "none.csv")]) == 3
    assert main(["run"]) == 1


def test_module_entry_point():
    res = subprocess.run([sys.executable, "-m", "drfgp", "--help"], capture_output=True, text=True)
    assert res.returncode == 0 and "inspect" in res.stdout

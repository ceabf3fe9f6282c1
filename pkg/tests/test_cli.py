import subprocess
import sys

import pytest

from sqddpg.cli import main
from sqddpg.train import read_metrics

SMALL = ["--episodes", "2", "--episode-length", "20", "--batch-size", "8"]


def test_oracle_check(capsys):
    assert main(["oracle-check", "--games", "200", "--seed", "7"]) == 0
    out = capsys.readouterr().out
    assert "core-membership: 200/200" in out
    assert "FAIL" not in out


def test_train_writes_metrics(tmp_path, capsys):
    out = tmp_path / "run"
    assert main(["train", "--env", "coopnav", "--algo", "sqddpg", "--sample-size", "1", *SMALL, "--out", str(out)]) == 0
    assert len(read_metrics(out / "metrics.csv")) == 2


def test_config_file(tmp_path):
    cfg = tmp_path / "c.txt"
    cfg.write_text("env=traffic\nalgorithm=iddpg\nhidden_units=8\n")
    assert main(["train", "--config", str(cfg), *SMALL, "--out", str(tmp_path / "r")]) == 0
    assert "algorithm=iddpg" in (tmp_path / "r" / "config.txt").read_text()


def test_eval_and_trace(tmp_path, capsys):
    traffic, prey = tmp_path / "t", tmp_path / "p"
    main(["train", "--env", "traffic", *SMALL, "--out", str(traffic)])
    main(["train", "--env", "prey", *SMALL, "--out", str(prey)])
    capsys.readouterr()
    assert main(["eval-success", "--checkpoint", str(traffic / "checkpoint"), "--episodes", "10"]) == 0
    assert "success-rate:" in capsys.readouterr().out
    assert main(["eval-success", "--checkpoint", str(traffic / "checkpoint"), "--episodes", "10",
                 "--min-rate", "1.01"]) == 1
    assert main(["eval-pcc", "--checkpoint", str(prey / "checkpoint"), "--samples", "30"]) in (0, 1)
    assert main(["trace", "--checkpoint", str(prey / "checkpoint"), "--expert", str(prey / "checkpoint"),
                 "--out", str(tmp_path / "trace")]) == 0
    for name in ("credit_trace.csv", "trace.svg", "trajectory.npz"):
        assert (tmp_path / "trace" / name).exists()


@pytest.mark.parametrize("argv", [["explode"], [], ["train", "--env", "soccer"], ["eval-pcc"]])
def test_usage_errors(argv, capsys):
    assert main(argv) == 2
    assert "usage" in capsys.readouterr().err


def test_missing_checkpoint(tmp_path):
    assert main(["eval-success", "--checkpoint", str(tmp_path / "nope")]) == 2


def test_console_entry_point():
    proc = subprocess.run([sys.executable, "-m", "sqddpg.cli", "bogus"], capture_output=True, text=True)
    assert proc.returncode == 2 and "usage" in proc.stderr

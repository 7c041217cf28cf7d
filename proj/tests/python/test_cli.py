import csv
import os
import subprocess

import pytest

CLI = os.environ.get("HIERREC_CLI")
pytestmark = pytest.mark.skipif(not CLI, reason="HIERREC_CLI not set")

TINY = [
    "training.episodes=6",
    "training.batch_size=3",
    "encoder.d_m=16",
    "encoder.d_h=16",
    "evaluation.n_students=3",
    "evaluation.seeds=[0]",
    "evaluation.sweep.values=[1,2]",
]


def run(*args):
    return subprocess.run([CLI, *args], capture_output=True, text=True)


def sets(out_dir, extra=()):
    args = []
    for item in [f"output_dir={out_dir}", *TINY, *extra]:
        args += ["--set", item]
    return args


def test_help_exits_zero():
    assert run("--help").returncode == 0


def test_unknown_key_is_config_error(tmp_path):
    r = run("train", *sets(tmp_path, ["training.nope=1"]))
    assert r.returncode == 2
    assert "nope" in r.stderr


def test_bad_learning_rate_is_config_error(tmp_path):
    assert run("train", *sets(tmp_path, ["training.learning_rate=0.01"])).returncode == 2


def test_missing_config_file(tmp_path):
    assert run("train", "--config", str(tmp_path / "absent.json")).returncode == 2


def test_unknown_subcommand():
    assert run("fly").returncode == 2


def test_missing_logs_for_train_kt(tmp_path):
    r = run("train-kt", *sets(tmp_path))
    assert r.returncode == 2
    assert "interactions.csv" in r.stderr


def test_full_pipeline_layout(tmp_path):
    assert run("train", *sets(tmp_path)).returncode == 0
    assert run("evaluate", *sets(tmp_path)).returncode == 0
    assert run("sweep", *sets(tmp_path)).returncode == 0
    for sub in ["checkpoints", "metrics", "results", "plots", "logs"]:
        assert (tmp_path / sub).is_dir()
    with open(tmp_path / "results" / "eval_hierrec.csv") as f:
        rows = list(csv.DictReader(f))
    assert list(rows[0].keys()) == ["simulator", "budget", "seed", "n_students", "mean_delta", "std_delta"]
    assert {r["budget"] for r in rows} == {"10", "30"}
    assert (tmp_path / "plots" / "learning_curve.svg").exists()
    assert (tmp_path / "plots" / "eval_budgets.svg").exists()
    assert (tmp_path / "results" / "sweep_k_concepts.csv").exists()
    assert (tmp_path / "logs" / "train.log").exists()

    # A checkpoint built for another architecture is rejected as a config error.
    r = run("evaluate", *sets(tmp_path, ["encoder.d_m=32"]))
    assert r.returncode == 2


def test_rerun_is_byte_identical(tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    for d in (a, b):
        assert run("train", *sets(d)).returncode == 0
    assert (a / "metrics" / "train.csv").read_bytes() == (b / "metrics" / "train.csv").read_bytes()
    assert (a / "checkpoints" / "policy.ckpt").read_bytes() != b""


def test_gen_logs_headers(tmp_path):
    r = run("gen-logs", *sets(tmp_path, ["simulator.logs.students=4", "simulator.logs.steps=5"]))
    assert r.returncode == 0
    with open(tmp_path / "logs" / "interactions.csv") as f:
        lines = f.read().splitlines()
    assert lines[0] == "student_id,question_id,correct,session_id,timestamp"
    assert len(lines) == 1 + 20

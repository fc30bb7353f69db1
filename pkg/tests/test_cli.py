import json
from pathlib import Path

import numpy as np
import pytest

from tkgcl.cli import main


def _run(*argv):
    return main([str(a) for a in argv])


def _manifest(out_dir):
    path = Path(out_dir) / "manifest.jsonl"
    return [json.loads(line) for line in path.read_text().splitlines()]


@pytest.fixture(scope="module")
def toy_file(tmp_path_factory):
    path = tmp_path_factory.mktemp("data") / "toy.txt"
    assert _run("toy", "--out", path, "--entities", 16, "--relations", 3,
                "--tasks", 3, "--facts-per-task", 30, "--seed", 1) == 0
    return path


@pytest.fixture(scope="module")
def dataset(toy_file, tmp_path_factory):
    out = tmp_path_factory.mktemp("data") / "ds"
    assert _run("ingest", "--data", toy_file, "--out", out, "--seed", 0) == 0
    return out


def _train_args(dataset, out, *extra):
    return ["train", "--dataset", dataset, "--out", out, "--dim", 8, "--layers", 2,
            "--epochs", 3, "--patience", 0, "--window", 2, "--heads", 2,
            "--k", 2, "--dm-steps", 8, "--dm-pretrain-epochs", 3,
            "--dm-epochs", 1, "--seed", 5, *extra]


def test_ingest_idempotent(toy_file, tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    assert _run("ingest", "--data", toy_file, "--out", a, "--seed", 3) == 0
    assert _run("ingest", "--data", toy_file, "--out", b, "--seed", 3) == 0
    files_a = sorted(p.relative_to(a) for p in a.rglob("*") if p.is_file())
    files_b = sorted(p.relative_to(b) for p in b.rglob("*") if p.is_file())
    assert files_a == files_b
    for rel in files_a:
        assert (a / rel).read_bytes() == (b / rel).read_bytes()


def test_ingest_missing_file_exit_2(tmp_path, capsys):
    missing = tmp_path / "nope.txt"
    assert _run("ingest", "--data", missing, "--out", tmp_path / "out") == 2
    assert str(missing) in capsys.readouterr().err


def test_ingest_builds_task_directories(dataset):
    task_dirs = sorted(p.name for p in (Path(dataset) / "tasks").iterdir())
    assert task_dirs == ["t000", "t001", "t002"]
    for td in task_dirs:
        base = Path(dataset) / "tasks" / td
        n_tr = len(base.joinpath("train.txt").read_text().splitlines())
        n_va = len(base.joinpath("valid.txt").read_text().splitlines())
        n_te = len(base.joinpath("test.txt").read_text().splitlines())
        n = n_tr + n_va + n_te
        exp_tr = int(n * 0.8)
        exp_va = int(n * 0.1)
        exp_te = int(n * 0.1)
        exp_tr += n - (exp_tr + exp_va + exp_te)
        assert (n_tr, n_va, n_te) == (exp_tr, exp_va, exp_te)


def test_train_ft_smoke_writes_checkpoints(dataset, tmp_path):
    out = tmp_path / "run_ft"
    assert _run(*_train_args(dataset, out, "--method", "ft")) == 0
    for t in range(3):
        assert (out / f"reasoner_t{t:03d}.npz").exists()
    events = [r["event"] for r in _manifest(out)]
    assert events[0] == "run-start" and events[-1] == "run-end"
    assert events.count("task") == 3


def test_defaults_echoed_into_manifest(dataset, tmp_path):
    out = tmp_path / "run_defaults"
    assert _run("train", "--dataset", dataset, "--out", out, "--method", "ft",
                "--dim", 8, "--layers", 1, "--epochs", 1, "--patience", 0,
                "--heads", 2, "--seed", 0) == 0
    start = _manifest(out)[0]
    # omitted hyperparameters appear with their documented defaults
    assert start["config"]["lr"] == 1e-3
    assert start["config"]["mu"] == 1.0
    assert start["config"]["gamma"] == 1.0
    assert start["config"]["seed"] == 0


def test_conflicting_flags_usage_error(dataset, tmp_path):
    code = _run(*_train_args(dataset, tmp_path / "x", "--method", "ft", "--no-gr"))
    assert code == 2


def test_no_guider_digest_equals_gamma_zero(dataset, tmp_path):
    a, b = tmp_path / "ng", tmp_path / "g0"
    assert _run(*_train_args(dataset, a, "--method", "dgar", "--no-guider")) == 0
    assert _run(*_train_args(dataset, b, "--method", "dgar", "--gamma", 0.0)) == 0
    dig_a = [r["reasoner_digest"] for r in _manifest(a) if r["event"] == "task"]
    dig_b = [r["reasoner_digest"] for r in _manifest(b) if r["event"] == "task"]
    assert dig_a == dig_b


def test_eval_writes_labeled_reports_and_is_deterministic(dataset, tmp_path):
    run_dir = tmp_path / "run"
    assert _run(*_train_args(dataset, run_dir, "--method", "ft")) == 0
    out1, out2 = tmp_path / "ev1", tmp_path / "ev2"
    assert _run("eval", "--dataset", dataset, "--checkpoints", run_dir,
                "--out", out1, "--filter", "both") == 0
    assert _run("eval", "--dataset", dataset, "--checkpoints", run_dir,
                "--out", out2, "--filter", "both") == 0
    report = (out1 / "report.jsonl").read_text()
    assert '"filter": "raw"' in report and '"filter": "time"' in report
    assert (out1 / "report.jsonl").read_bytes() == (out2 / "report.jsonl").read_bytes()
    assert (out1 / "summary.txt").read_bytes() == (out2 / "summary.txt").read_bytes()
    assert (out1 / "mrr_curves.png").exists()
    assert (out1 / "forgetting.png").exists()


def test_eval_missing_checkpoint_exit_3(dataset, tmp_path, capsys):
    run_dir = tmp_path / "run"
    assert _run(*_train_args(dataset, run_dir, "--method", "ft")) == 0
    (run_dir / "reasoner_t001.npz").unlink()
    code = _run("eval", "--dataset", dataset, "--checkpoints", run_dir,
                "--out", tmp_path / "ev")
    assert code == 3
    assert "task 1" in capsys.readouterr().err


def test_report_regenerates_summary(dataset, tmp_path):
    run_dir = tmp_path / "run"
    assert _run(*_train_args(dataset, run_dir, "--method", "ft")) == 0
    ev = tmp_path / "ev"
    assert _run("eval", "--dataset", dataset, "--checkpoints", run_dir,
                "--out", ev, "--no-plots") == 0
    out = tmp_path / "rep"
    assert _run("report", "--metrics", ev, "--out", out) == 0
    assert (out / "summary.txt").exists()
    # the regenerated summary table agrees with the original
    assert (out / "summary.txt").read_text().splitlines()[3:] == \
        (ev / "summary.txt").read_text().splitlines()[3:]


def test_pretrain_dm_writes_checkpoint(dataset, tmp_path):
    out = tmp_path / "dm"
    assert _run("pretrain-dm", "--dataset", dataset, "--out", out, "--dim", 8,
                "--heads", 2, "--dm-steps", 8, "--dm-pretrain-epochs", 2,
                "--seed", 0) == 0
    assert (out / "denoiser_t000.npz").exists()
    from tkgcl.checkpoint import load_denoiser
    dm, schedule = load_denoiser(out / "denoiser_t000.npz")
    assert dm.dim == 8 and schedule.n_steps == 8


def test_train_dgar_writes_denoiser_checkpoints(dataset, tmp_path):
    out = tmp_path / "run_dgar"
    assert _run(*_train_args(dataset, out, "--method", "dgar")) == 0
    for t in range(3):
        assert (out / f"denoiser_t{t:03d}.npz").exists()


def test_config_file_with_flag_override(dataset, tmp_path):
    cfg = tmp_path / "run.cfg"
    cfg.write_text("method = ft\nepochs = 2\ndim = 8\nheads = 2\n"
                   "n_layers = 1\npatience = 0\nseed = 9\n")
    out = tmp_path / "run_cfg"
    assert _run("train", "--dataset", dataset, "--out", out, "--config", cfg,
                "--epochs", 1) == 0
    start = _manifest(out)[0]
    assert start["config"]["epochs"] == 1  # flag wins
    assert start["config"]["seed"] == 9    # file value kept

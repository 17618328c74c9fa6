import csv

import orjson
import pytest
from typer.testing import CliRunner

from dataset.storage import load_dataset, save_dataset
from main import SIMULATE_COLUMNS, app
from training.checkpoint import read_checkpoint_header

runner = CliRunner()

ZERO_TENSION = [
    "--offsets", "0.01,0.01,0.01,0.01",
    "--pitches", "0,0,0,0",
    "--tensions", "0,0,0,0",
    "--radius", "0.001",
    "--length", "0.2",
    "--modulus", "30e9",
]  # fmt: skip

TINY_DIMS = {"branch_hidden": 8, "trunk_hidden": 8, "mlp_layers": 3, "basis": 4, "fno_width": 8, "fno_modes": 3, "fno_layers": 2}


def write_config(path, data):
    path.write_bytes(orjson.dumps(data))
    return path


def read_csv(path):
    with path.open(newline="") as f:
        return list(csv.DictReader(f))


@pytest.fixture
def gen_config(tmp_path):
    return write_config(
        tmp_path / "gen.json",
        {
            "n_samples": 16,
            "seed": 5,
            "test_fraction": 0.25,
            "ranges": {"tension": [0.0, 1.0], "pitch": [-5.0, 5.0]},
            "workers": 1,
            "verify_rows": 1,
        },
    )


@pytest.fixture
def train_config(tmp_path):
    return write_config(
        tmp_path / "train.json",
        {"batch_size": 8, "max_epochs": 3, "dims": TINY_DIMS, "schedule": {"horizon": 100}},
    )


def test_simulate_zero_tension(tmp_path):
    result = runner.invoke(app, ["simulate", *ZERO_TENSION, "--out", str(tmp_path)])
    assert result.exit_code == 0, result.output

    rows = read_csv(tmp_path / "equilibrium.csv")
    assert tuple(rows[0]) == tuple(SIMULATE_COLUMNS)
    assert len(rows) == 42
    for row in rows:
        assert float(row["rz"]) == pytest.approx(float(row["s"]), abs=1e-12)
        assert float(row["R11"]) == pytest.approx(1.0, abs=1e-12)
        assert float(row["t1x"]) == pytest.approx(0.01, abs=1e-12)

    diagnostics = orjson.loads((tmp_path / "equilibrium.json").read_bytes())
    assert diagnostics["converged"] is True
    assert (tmp_path / "manifest.json").exists() and (tmp_path / "effective_config.json").exists()


def test_simulate_fine_grid_reports_production_nodes(tmp_path):
    golden = tmp_path / "goldens.txt"
    args = ["simulate", *ZERO_TENSION, "--steps", "82", "--golden", str(golden), "--out", str(tmp_path)]
    result = runner.invoke(app, args)
    assert result.exit_code == 0, result.output
    assert len(read_csv(tmp_path / "equilibrium.csv")) == 42
    assert golden.read_text().strip()


def test_simulate_missing_flag_is_a_usage_error(tmp_path):
    result = runner.invoke(app, ["simulate", *ZERO_TENSION[:-2], "--out", str(tmp_path)])
    assert result.exit_code == 2


def test_simulate_rejects_bad_values(tmp_path):
    args = ["simulate", *ZERO_TENSION[:2], "--pitches", "0,0,0", *ZERO_TENSION[4:], "--out", str(tmp_path)]
    assert runner.invoke(app, args).exit_code == 2

    negative = [*ZERO_TENSION]
    negative[negative.index("--radius") + 1] = "-0.001"
    assert runner.invoke(app, ["simulate", *negative, "--out", str(tmp_path)]).exit_code == 2


def test_unknown_config_key_is_a_config_error(tmp_path):
    config = write_config(tmp_path / "solver.json", {"steps": 41, "bogus": 1})
    result = runner.invoke(app, ["simulate", *ZERO_TENSION, "--config", str(config), "--out", str(tmp_path)])
    assert result.exit_code == 2
    assert "/bogus" in result.output


def test_train_needs_a_dataset(tmp_path, train_config):
    result = runner.invoke(app, ["train", "--config", str(train_config), "--out", str(tmp_path)])
    assert result.exit_code == 2


def test_tiny_pipeline(tmp_path, gen_config, train_config):
    data_dir = tmp_path / "data"
    result = runner.invoke(app, ["-q", "gen-data", "--config", str(gen_config), "--out", str(data_dir)])
    assert result.exit_code == 0, result.output
    dataset = data_dir / "dataset.tdcr"
    ds = load_dataset(dataset)
    assert ds.n_samples == 16 and len(ds.test_idx) == 4

    checkpoints = []
    for seed in (0, 1):
        run_dir = tmp_path / f"train-{seed}"
        args = ["-q", "train", "--config", str(train_config), "--dataset", str(dataset), "--arch", "fno_pose"]
        result = runner.invoke(app, [*args, "--seed", str(seed), "--out", str(run_dir)])
        assert result.exit_code == 0, result.output
        checkpoints.append(run_dir / "fno_pose.ckpt")
        assert len(read_csv(run_dir / "train_record.csv")) == 3
    assert read_checkpoint_header(checkpoints[0])["epoch"] == 3

    eval_dir = tmp_path / "eval"
    args = ["-q", "eval", "--dataset", str(dataset), "--out", str(eval_dir)]
    for path in checkpoints:
        args += ["--checkpoint", str(path)]
    result = runner.invoke(app, args)
    assert result.exit_code == 0, result.output

    report = orjson.loads((eval_dir / "eval_report.json").read_bytes())
    score = report["models"]["fno_pose"]
    assert score["seed_count"] == 2
    assert 0.0 <= score["mean_error"] < float("inf")

    # 같은 시드로 다시 돌리면 같은 결과
    again = tmp_path / "again"
    result = runner.invoke(app, ["-q", "gen-data", "--config", str(gen_config), "--out", str(again)])
    assert result.exit_code == 0, result.output
    assert load_dataset(again / "dataset.tdcr").equals(ds)

    rerun = tmp_path / "train-0-again"
    args = ["-q", "train", "--config", str(train_config), "--dataset", str(dataset), "--arch", "fno_pose"]
    assert runner.invoke(app, [*args, "--seed", "0", "--out", str(rerun)]).exit_code == 0
    assert (rerun / "fno_pose.ckpt").read_bytes() == checkpoints[0].read_bytes()


def test_eval_rejects_mismatched_architecture(tmp_path, tiny_dataset, train_config):
    dataset = save_dataset(tiny_dataset, tmp_path / "tiny.tdcr")
    args = ["-q", "train", "--config", str(train_config), "--dataset", str(dataset), "--arch", "deeponet"]
    assert runner.invoke(app, [*args, "--out", str(tmp_path / "run")]).exit_code == 0

    ckpt = tmp_path / "run" / "deeponet.ckpt"
    args = ["-q", "eval", "--dataset", str(dataset), "--checkpoint", str(ckpt), "--arch", "fno"]
    result = runner.invoke(app, [*args, "--out", str(tmp_path / "eval")])
    assert result.exit_code == 1
    assert "expected 'fno'" in result.output


def test_eval_missing_checkpoint_is_a_config_error(tmp_path, tiny_dataset):
    dataset = save_dataset(tiny_dataset, tmp_path / "tiny.tdcr")
    args = ["eval", "--dataset", str(dataset), "--checkpoint", str(tmp_path / "nope.ckpt"), "--out", str(tmp_path)]
    result = runner.invoke(app, args)
    assert result.exit_code == 2
    assert "/checkpoints/0" in result.output


def test_bench_pins_thread_count(tmp_path):
    config = write_config(
        tmp_path / "bench.json",
        {"architectures": ["fno"], "workloads": [1], "train_sizes": [], "warmup": 0, "dims": TINY_DIMS},
    )
    result = runner.invoke(app, ["-q", "bench", "--config", str(config), "--threads", "1", "--out", str(tmp_path)])
    assert result.exit_code == 0, result.output

    (row,) = read_csv(tmp_path / "timing.csv")
    assert row["hardware"].endswith("/ 1 threads")
    effective = orjson.loads((tmp_path / "effective_config.json").read_bytes())
    assert effective["torch_threads"] == 1
    assert runner.invoke(app, ["bench", "--threads", "0", "--out", str(tmp_path)]).exit_code == 2

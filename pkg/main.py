# main.py
import csv
import logging
from pathlib import Path
from typing import List, Optional

import numpy as np
import typer
from rich.console import Console
from rich.table import Table

from config.loader import load_config, write_json, write_provenance
from config.log import configure_logging
from config.settings import Config
from dataset.generate import generate_dataset, verify_dataset
from dataset.splits import split_dataset
from dataset.storage import load_dataset, save_dataset
from errors import ConfigError, NonConvergenceError, TdcrError
from evaluation.metrics import evaluate_model
from evaluation.studies import StudyResult, convergence_study, dropout_study, ood_study
from evaluation.timing import timing_bench, write_timing
from model import BenchConfig, DesignVector, EvalConfig, GenDataConfig, SolverConfig, StudyConfig, TrainConfig
from neuralops.factory import build_model, count_parameters
from rodmodel.goldens import append_golden
from rodmodel.shooting import EquilibriumConfig, solve_equilibrium
from training.checkpoint import load_checkpoint, read_checkpoint_header
from training.trainer import train

logger = logging.getLogger("tdcrop")
console = Console()

app = typer.Typer(help="TDCR 평형 솔버와 뉴럴 오퍼레이터 대리 모델 파이프라인", no_args_is_help=True)
study_app = typer.Typer(help="수렴 / 드롭아웃 / 분포 밖 실험", no_args_is_help=True)
app.add_typer(study_app, name="study")

SIMULATE_COLUMNS = (
    ["s", "rx", "ry", "rz"]
    + [f"R{i}{j}" for i in range(1, 4) for j in range(1, 4)]
    + [f"t{k}{axis}" for k in range(1, Config.N_TENDONS + 1) for axis in "xyz"]
)

ConfigOpt = typer.Option(None, "--config", "-c", help="JSON 설정 파일", exists=True, dir_okay=False)
SeedOpt = typer.Option(None, "--seed", help="전역 시드 (설정 파일 값을 덮어씀)", min=0)
OutOpt = typer.Option(None, "--out", "-o", help="출력 디렉토리")
ThreadsOpt = typer.Option(None, "--threads", help="병렬 작업자 수 (기본: 사용 가능한 코어 수)", min=1)


def _out_dir(out: Optional[Path], command: str) -> Path:
    out_dir = Path(out) if out is not None else Config.OUTPUT_DIR / command
    out_dir.mkdir(parents=True, exist_ok=True)
    return out_dir


def _require_file(path: Path, pointer: str) -> Path:
    if not Path(path).is_file():
        raise ConfigError(f"file not found: {path}", [pointer])
    return Path(path)


def _fail(e: TdcrError) -> typer.Exit:
    console.print(f"[red]error:[/red] {e}")
    if isinstance(e, ConfigError):
        for pointer in e.pointers:
            console.print(f"  at {pointer}")
    return typer.Exit(code=e.exit_code)


def _floats(raw: Optional[str], name: str) -> List[float]:
    try:
        values = [float(v) for v in raw.split(",")]
    except ValueError as e:
        raise typer.BadParameter(f"expected comma-separated numbers, got '{raw}'", param_hint=name) from e
    if len(values) != Config.N_TENDONS:
        raise typer.BadParameter(f"expected {Config.N_TENDONS} values, got {len(values)}", param_hint=name)
    return values


@app.callback()
def main(
    verbose: int = typer.Option(0, "--verbose", "-v", count=True, help="DEBUG 로그"),
    quiet: bool = typer.Option(False, "--quiet", "-q", help="경고 이상만 출력"),
):
    configure_logging(verbose, quiet)


def _design_from_flags(
    design_file: Optional[Path],
    offsets: Optional[str],
    pitches: Optional[str],
    tensions: Optional[str],
    radius: Optional[float],
    length: Optional[float],
    modulus: Optional[float],
) -> DesignVector:
    if design_file is not None:
        return load_config(DesignVector, design_file)
    required = {
        "--offsets": offsets,
        "--pitches": pitches,
        "--tensions": tensions,
        "--radius": radius,
        "--length": length,
        "--modulus": modulus,
    }
    missing = [flag for flag, value in required.items() if value is None]
    if missing:
        raise typer.BadParameter(f"missing {', '.join(missing)} (or pass --design)", param_hint="design")
    return load_config(
        DesignVector,
        overrides={
            "tendon_offsets": _floats(offsets, "--offsets"),
            "tendon_pitches": _floats(pitches, "--pitches"),
            "tendon_tensions": _floats(tensions, "--tensions"),
            "backbone_radius": radius,
            "backbone_length": length,
            "youngs_modulus": modulus,
        },
    )


def write_equilibrium_csv(path: Path, eq: EquilibriumConfig) -> Path:
    with Path(path).open("w", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(SIMULATE_COLUMNS)
        for k in range(eq.n_nodes):
            row = [eq.arclengths[k], *eq.backbone[k], *eq.frames[k].reshape(-1), *eq.tendon_curves[:, k].reshape(-1)]
            writer.writerow([repr(float(v)) for v in row])
    return Path(path)


def diagnostics(eq: EquilibriumConfig) -> dict:
    return {
        "converged": True,
        "residual_norm": eq.residual_norm,
        "iterations": eq.iterations,
        "used_homotopy": eq.used_homotopy,
        "steps": eq.steps,
        "n_nodes": eq.n_nodes,
        "base_loads": eq.base_loads,
        "tip": eq.tip,
        "internal_force": eq.internal_force,
        "internal_moment": eq.internal_moment,
    }


@app.command()
def simulate(
    design_file: Optional[Path] = typer.Option(None, "--design", help="DesignVector JSON", exists=True, dir_okay=False),
    offsets: Optional[str] = typer.Option(None, "--offsets", help="텐던 오프셋 ρ1..4 [m], 쉼표 구분"),
    pitches: Optional[str] = typer.Option(None, "--pitches", help="텐던 피치 φ1..4 [rad/m]"),
    tensions: Optional[str] = typer.Option(None, "--tensions", help="텐던 장력 τ1..4 [N]"),
    radius: Optional[float] = typer.Option(None, "--radius", help="백본 반지름 [m]"),
    length: Optional[float] = typer.Option(None, "--length", help="백본 길이 [m]"),
    modulus: Optional[float] = typer.Option(None, "--modulus", help="영률 [Pa]"),
    steps: Optional[int] = typer.Option(None, "--steps", min=1, help="RK4 스텝 수 (기본 41)"),
    golden: Optional[Path] = typer.Option(None, "--golden", help="팁 위치를 추가할 골든 픽스처 파일"),
    config: Optional[Path] = ConfigOpt,
    out: Optional[Path] = OutOpt,
):
    """설계 하나의 평형 형상을 풀어 CSV와 진단 JSON으로 남긴다."""
    try:
        design = _design_from_flags(design_file, offsets, pitches, tensions, radius, length, modulus)
        solver = load_config(SolverConfig, config, {"steps": steps})
        out_dir = _out_dir(out, "simulate")
        write_provenance(out_dir, "simulate", solver)
        write_json(out_dir / "design.json", design)
        try:
            eq = solve_equilibrium(design, solver)
        except NonConvergenceError as e:
            write_json(
                out_dir / "equilibrium.json",
                {"converged": False, "best_residual": e.best_residual, "iterations": e.iterations},
            )
            raise
        if eq.steps != Config.PRODUCTION_STEPS and eq.steps % Config.PRODUCTION_STEPS == 0:
            eq = eq.subsample(Config.N_NODES)
        write_equilibrium_csv(out_dir / "equilibrium.csv", eq)
        write_json(out_dir / "equilibrium.json", diagnostics(eq))
        if golden is not None:
            append_golden(golden, design.to_array(), eq.tip, solver.steps)
    except TdcrError as e:
        raise _fail(e)

    console.print(
        f"residual {eq.residual_norm:.2e} after {eq.iterations} iterations"
        f"{' (homotopy)' if eq.used_homotopy else ''}; tip {np.array2string(eq.tip, precision=5)}"
    )


@app.command("gen-data")
def gen_data(
    config: Optional[Path] = ConfigOpt,
    samples: Optional[int] = typer.Option(None, "--samples", "-n", min=1, help="샘플 수"),
    seed: Optional[int] = SeedOpt,
    out: Optional[Path] = OutOpt,
    threads: Optional[int] = ThreadsOpt,
):
    """설계를 뽑아 풀고, 일부 행을 검증한 뒤 분할된 데이터셋 파일을 쓴다."""
    try:
        cfg = load_config(GenDataConfig, config, {"n_samples": samples, "seed": seed, "workers": threads})
        out_dir = _out_dir(out, "gen-data")
        path = cfg.output if cfg.output.is_absolute() else out_dir / cfg.output

        ds = generate_dataset(cfg.n_samples, cfg.seed, cfg.ranges, cfg.solver, cfg.workers)
        ds = split_dataset(ds, cfg.test_fraction, cfg.seed)
        if cfg.verify_rows:
            verify_dataset(ds, cfg.verify_rows, cfg.seed, cfg.solver)
        save_dataset(ds, path)
        write_provenance(out_dir, "gen-data", cfg, [cfg.seed])
    except TdcrError as e:
        raise _fail(e)

    console.print(
        f"{ds.n_samples} samples ({len(ds.train_idx)} train / {len(ds.test_idx)} test, "
        f"{ds.failures} resampled) → {path}"
    )


@app.command("train")
def train_cmd(
    config: Optional[Path] = ConfigOpt,
    dataset: Optional[Path] = typer.Option(None, "--dataset", "-d", help="데이터셋 파일"),
    architecture: Optional[str] = typer.Option(None, "--arch", help="deeponet | deeponet_pose | fno | fno_pose"),
    epochs: Optional[int] = typer.Option(None, "--epochs", min=1, help="최대 에폭 수"),
    resume: Optional[Path] = typer.Option(None, "--resume", help="이어서 학습할 체크포인트", exists=True),
    seed: Optional[int] = SeedOpt,
    out: Optional[Path] = OutOpt,
    threads: Optional[int] = ThreadsOpt,
):
    """데이터셋의 학습 분할로 모델 하나를 학습하고 체크포인트와 학습 기록을 남긴다."""
    try:
        cfg = load_config(
            TrainConfig,
            config,
            {
                "dataset": str(dataset) if dataset else None,
                "architecture": architecture,
                "max_epochs": epochs,
                "seed": seed,
                "torch_threads": threads,
            },
        )
        if cfg.dataset is None:
            raise ConfigError("a dataset is required (--dataset or /dataset)", ["/dataset"])
        out_dir = _out_dir(out or cfg.output_dir, "train")
        write_provenance(out_dir, "train", cfg, [cfg.seed])

        ds = load_dataset(_require_file(cfg.dataset, "/dataset"))
        checkpoint = load_checkpoint(resume, cfg.architecture) if resume is not None else None
        model = build_model(cfg.architecture, cfg.dims, cfg.seed)
        logger.info("%s with %d parameters", cfg.architecture, count_parameters(model))
        result = train(model, ds, cfg, resume=checkpoint, out_dir=out_dir)
    except TdcrError as e:
        raise _fail(e)

    last = result.record.rows[-1].rel_l2 if len(result.record) else float("nan")
    status = "converged" if result.stopped_early else "reached max epochs"
    console.print(f"{cfg.architecture}: {status} at epoch {result.epochs}, train rel-l2 {last:.4e} → {result.checkpoint}")


@app.command("eval")
def eval_cmd(
    config: Optional[Path] = ConfigOpt,
    dataset: Optional[Path] = typer.Option(None, "--dataset", "-d", help="데이터셋 파일"),
    checkpoints: Optional[List[Path]] = typer.Option(None, "--checkpoint", help="시드별 체크포인트 (반복 가능)"),
    architecture: Optional[str] = typer.Option(None, "--arch", help="기대하는 아키텍처"),
    out: Optional[Path] = OutOpt,
):
    """시드별 체크포인트를 테스트 분할에서 채점하고 평균을 낸다."""
    try:
        cfg = load_config(
            EvalConfig,
            config,
            {
                "dataset": str(dataset) if dataset else None,
                "checkpoints": [str(c) for c in checkpoints] if checkpoints else None,
                "architecture": architecture,
            },
        )
        out_dir = _out_dir(out, "eval")
        write_provenance(out_dir, "eval", cfg)

        for i, path in enumerate(cfg.checkpoints):
            _require_file(path, f"/checkpoints/{i}")
        _require_file(cfg.dataset, "/dataset")
        expected = cfg.architecture or read_checkpoint_header(cfg.checkpoints[0]).get("architecture")
        models = [load_checkpoint(path, expected).model for path in cfg.checkpoints]
        ds = load_dataset(cfg.dataset)
        report = evaluate_model(models, ds, expected)
        report.dataset = str(cfg.dataset)
        write_json(out_dir / "eval_report.json", report)
    except TdcrError as e:
        raise _fail(e)

    for name, score in report.models.items():
        console.print(
            f"{name}: relative l2 {score.mean_error:.4e} (accuracy {score.accuracy:.2f}%) over {score.seed_count} seeds"
        )


def _study_config(config: Optional[Path], dataset: Optional[Path], seed: Optional[int], threads: Optional[int]):
    cfg = load_config(
        StudyConfig,
        config,
        {
            "dataset": str(dataset) if dataset else None,
            "seeds": [seed] if seed is not None else None,
            "workers": threads,
        },
    )
    return cfg


def _print_study(result: StudyResult) -> None:
    table = Table(title=f"{result.study} study")
    table.add_column("model")
    table.add_column("value")
    table.add_column("mean error", justify="right")
    table.add_column("accuracy", justify="right")
    for model_name, by_value in result.summary.items():
        for value, stats in by_value.items():
            table.add_row(model_name, value, f"{stats['mean_error']:.4e}", f"{stats['accuracy']:.2f}%")
    console.print(table)
    if result.failures:
        console.print(f"[yellow]{len(result.failures)} cells failed; see {result.csv_path}[/yellow]")


StudyDatasetOpt = typer.Option(None, "--dataset", "-d", help="분할된 마스터 데이터셋")


@study_app.command("convergence")
def study_convergence(
    config: Optional[Path] = ConfigOpt,
    dataset: Optional[Path] = StudyDatasetOpt,
    n_list: Optional[List[int]] = typer.Option(None, "--n", help="학습 세트 크기 (반복 가능)"),
    seed: Optional[int] = SeedOpt,
    out: Optional[Path] = OutOpt,
    threads: Optional[int] = ThreadsOpt,
):
    """학습 샘플 수 N에 따른 일반화 오차."""
    try:
        cfg = _study_config(config, dataset, seed, threads)
        out_dir = _out_dir(out, "study-convergence")
        write_provenance(out_dir, "study convergence", cfg, cfg.seeds)
        result = convergence_study(n_list or cfg.n_list, cfg, out_dir)
    except TdcrError as e:
        raise _fail(e)
    _print_study(result)


@study_app.command("dropout")
def study_dropout(
    config: Optional[Path] = ConfigOpt,
    dataset: Optional[Path] = StudyDatasetOpt,
    q_list: Optional[List[float]] = typer.Option(None, "--q", help="드롭아웃 확률 (반복 가능)"),
    seed: Optional[int] = SeedOpt,
    out: Optional[Path] = OutOpt,
    threads: Optional[int] = ThreadsOpt,
):
    """드롭아웃 확률 q에 따른 일반화 오차."""
    try:
        cfg = _study_config(config, dataset, seed, threads)
        out_dir = _out_dir(out, "study-dropout")
        write_provenance(out_dir, "study dropout", cfg, cfg.seeds)
        result = dropout_study(q_list or cfg.q_list, cfg, out_dir)
    except TdcrError as e:
        raise _fail(e)
    _print_study(result)


@study_app.command("ood")
def study_ood(
    config: Optional[Path] = ConfigOpt,
    dataset: Optional[Path] = StudyDatasetOpt,
    seed: Optional[int] = SeedOpt,
    out: Optional[Path] = OutOpt,
    threads: Optional[int] = ThreadsOpt,
):
    """학습 범위를 넘어선 구간별 오차."""
    try:
        cfg = _study_config(config, dataset, seed, threads)
        out_dir = _out_dir(out, "study-ood")
        write_provenance(out_dir, "study ood", cfg, [*cfg.seeds, cfg.ood_seed])
        result = ood_study(cfg, out_dir)
    except TdcrError as e:
        raise _fail(e)
    _print_study(result)


@app.command()
def bench(
    config: Optional[Path] = ConfigOpt,
    large: bool = typer.Option(False, "--large", help="80,000 설계 워크로드 포함"),
    seed: Optional[int] = SeedOpt,
    threads: Optional[int] = typer.Option(None, "--threads", help="torch 연산 스레드 수 (기본: torch 기본값)", min=1),
    out: Optional[Path] = OutOpt,
):
    """추론과 학습 에폭의 벽시계 시간 (중앙값)."""
    try:
        overrides = {"seed": seed, "include_large": large or None, "torch_threads": threads}
        cfg = load_config(BenchConfig, config, overrides)
        out_dir = _out_dir(out, "bench")
        write_provenance(out_dir, "bench", cfg, [cfg.seed])
        rows = timing_bench(cfg)
        write_timing(out_dir / "timing.csv", rows)
    except TdcrError as e:
        raise _fail(e)

    table = Table(title="timing (median seconds)")
    for column in ("model", "workload", "seconds"):
        table.add_column(column)
    for r in rows:
        table.add_row(r.model, r.workload, f"{r.seconds:.4g}")
    console.print(table)


if __name__ == "__main__":
    app()

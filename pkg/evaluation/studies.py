# evaluation/studies.py
import asyncio
import csv
import hashlib
import logging
import time
from dataclasses import dataclass, field
from functools import lru_cache
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple

import aiofiles

from config.loader import dump_json, write_json
from config.settings import Config
from dataset.splits import nested_subset
from dataset.storage import Dataset, load_dataset, save_dataset
from errors import InputDomainError, TdcrError
from evaluation.cell_cache import CellCache
from evaluation.metrics import heldout_error
from evaluation.ood import ood_generate
from model import ModelScore, StudyConfig, StudyRow, TrainConfig
from neuralops.factory import build_model
from training.trainer import train
from workers import map_parallel, resolve_workers

logger = logging.getLogger(__name__)

STUDY_COLUMNS = ("study", "model", "seed", "param", "value", "error", "seconds")


@dataclass(frozen=True)
class StudyCell:
    """학습 한 번 = 셀 하나. OOD 셀은 한 번 학습하고 여러 평가 세트를 채점한다."""

    study: str
    architecture: str
    param: str
    value: float
    seed: int
    dataset: str
    n_train: int
    train: TrainConfig
    evaluations: Tuple[Tuple[float, str], ...] = ()


@dataclass
class StudyResult:
    study: str
    rows: List[StudyRow]
    summary: Dict[str, Dict[str, Dict[str, float]]] = field(default_factory=dict)
    csv_path: Optional[Path] = None
    summary_path: Optional[Path] = None

    @property
    def failures(self) -> List[StudyRow]:
        return [r for r in self.rows if r.failure is not None]


@lru_cache(maxsize=8)
def _load_cached(path: str, mtime_ns: int) -> Dataset:
    return load_dataset(Path(path))


def _load(path: str) -> Dataset:
    """작업자 프로세스마다 한 번만 읽는다. 파일이 바뀌면 다시 읽는다."""
    return _load_cached(path, Path(path).stat().st_mtime_ns)


def _run_cell(cell: StudyCell) -> List[StudyRow]:
    """작업자 프로세스에서 실행된다. 셀 안의 실패는 행으로 기록하고 던지지 않는다."""
    t0 = time.perf_counter()

    def row(value: float, error: Optional[float] = None, failure: Optional[str] = None) -> StudyRow:
        return StudyRow(
            study=cell.study,
            model=cell.architecture,
            seed=cell.seed,
            param=cell.param,
            value=value,
            error=error,
            seconds=time.perf_counter() - t0,
            failure=failure,
        )

    try:
        ds = _load(cell.dataset)
        idx = nested_subset(ds.train_idx, cell.n_train, ds.seed)
        config = cell.train.model_copy(update={"architecture": cell.architecture, "seed": cell.seed})
        model = build_model(cell.architecture, config.dims, cell.seed)
        train(model, ds, config, train_idx=idx)

        if not cell.evaluations:
            err, _ = heldout_error(model, ds)
            return [row(cell.value, err)]
        return [row(value, heldout_error(model, _load(path))[0]) for value, path in cell.evaluations]
    except TdcrError as e:
        failure = f"{type(e).__name__}: {e}"
        logger.warning("cell %s/%s %s=%g seed %d failed: %s", cell.study, cell.architecture, cell.param, cell.value, cell.seed, failure)
        values = [v for v, _ in cell.evaluations] or [cell.value]
        return [row(v, failure=failure) for v in values]


async def file_digest(path: Path) -> str:
    hasher = hashlib.sha256()
    async with aiofiles.open(path, "rb") as f:
        while True:
            chunk = await f.read(1 << 20)
            if not chunk:
                break
            hasher.update(chunk)
    return hasher.hexdigest()


async def cell_fingerprint(cell: StudyCell) -> str:
    """데이터셋 내용과 학습 설정이 같으면 같은 지문. 경로는 들어가지 않는다."""
    parts = [await file_digest(Path(cell.dataset)), str(cell.n_train)]
    parts += [await file_digest(Path(p)) for _, p in cell.evaluations]
    train_cfg = cell.train.model_dump(mode="json", exclude={"output_dir", "dataset", "architecture", "seed"})
    parts.append(dump_json(train_cfg).decode())
    return hashlib.sha256("|".join(parts).encode()).hexdigest()


def write_rows(path: Path, rows: Sequence[StudyRow]) -> Path:
    """실패한 셀은 error 칸을 비워 둔다."""
    path.parent.mkdir(parents=True, exist_ok=True)
    tmp = path.with_name(path.name + ".part")
    with tmp.open("w", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(STUDY_COLUMNS)
        for r in sorted(rows, key=lambda r: (r.model, r.value, r.seed)):
            error = "" if r.error is None else repr(r.error)
            writer.writerow([r.study, r.model, r.seed, r.param, repr(r.value), error, f"{r.seconds:.3f}"])
    tmp.replace(path)
    return path


def read_rows(path: Path) -> List[StudyRow]:
    with Path(path).open(newline="") as f:
        reader = csv.DictReader(f)
        if tuple(reader.fieldnames or ()) != STUDY_COLUMNS:
            raise InputDomainError(f"{path}: unexpected columns {reader.fieldnames}")
        return [
            StudyRow(
                study=r["study"],
                model=r["model"],
                seed=int(r["seed"]),
                param=r["param"],
                value=float(r["value"]),
                error=float(r["error"]) if r["error"] else None,
                seconds=float(r["seconds"]),
                failure=None if r["error"] else "failed",
            )
            for r in reader
        ]


def summarize(rows: Sequence[StudyRow]) -> Dict[str, Dict[str, Dict[str, float]]]:
    """모델 → 파라미터 값 → 시드 평균 오차와 정확도. 실패한 셀은 평균에서 빠진다."""
    grouped: Dict[str, Dict[float, List[float]]] = {}
    for r in rows:
        if r.error is None:
            continue
        grouped.setdefault(r.model, {}).setdefault(r.value, []).append(r.error)

    summary: Dict[str, Dict[str, Dict[str, float]]] = {}
    for model_name, by_value in grouped.items():
        summary[model_name] = {}
        for value in sorted(by_value):
            score = ModelScore.from_errors(model_name, by_value[value])
            summary[model_name][f"{value:g}"] = {
                "mean_error": score.mean_error,
                "accuracy": score.accuracy,
                "seed_count": score.seed_count,
            }
    return summary


async def run_cells(
    study: str,
    cells: Sequence[StudyCell],
    out_dir: Optional[Path] = None,
    workers: Optional[int] = None,
    cache_dir: Optional[Path] = None,
) -> StudyResult:
    """캐시에 없는 셀만 계산한다. 작업자 수만큼 묶어 돌리고 묶음마다 CSV를 갱신한다."""
    cache = CellCache(cache_dir or Config.cache_dir())
    await cache.initialize()

    rows: List[StudyRow] = []
    pending: List[Tuple[StudyCell, str]] = []
    for cell in cells:
        fingerprint = await cell_fingerprint(cell)
        values = [v for v, _ in cell.evaluations] or [cell.value]
        cached = [await cache.get(study, cell.architecture, cell.param, v, cell.seed, fingerprint) for v in values]
        if all(c is not None for c in cached):
            rows.extend(cached)
        else:
            pending.append((cell, fingerprint))
    logger.info("%s study: %d cells cached, %d to run", study, len(cells) - len(pending), len(pending))

    csv_path = Path(out_dir) / f"{study}.csv" if out_dir is not None else None
    workers = resolve_workers(workers)
    for start in range(0, len(pending), workers):
        chunk = pending[start : start + workers]
        results = await map_parallel(_run_cell, [c for c, _ in chunk], workers=workers, desc=study)
        for (_, fingerprint), cell_rows in zip(chunk, results):
            for r in cell_rows:
                await cache.put(r, fingerprint)
            rows.extend(cell_rows)
        if csv_path is not None:
            write_rows(csv_path, rows)

    result = StudyResult(study, rows, summarize(rows))
    if out_dir is not None:
        result.csv_path = write_rows(Path(out_dir) / f"{study}.csv", rows)
        result.summary_path = write_json(
            Path(out_dir) / f"{study}_summary.json",
            {"study": study, "models": result.summary, "failures": len(result.failures)},
        )
    if result.failures:
        logger.warning("%s study: %d cells failed", study, len(result.failures))
    return result


def _check_split(cfg: StudyConfig) -> Dataset:
    if not Path(cfg.dataset).is_file():
        raise InputDomainError(f"dataset not found: {cfg.dataset}")
    ds = _load(str(cfg.dataset))
    if not ds.has_split:
        raise InputDomainError(f"{cfg.dataset} has no train/test split")
    return ds


def _grid(cfg: StudyConfig, values: Sequence[float], make) -> List[StudyCell]:
    return [make(arch, value, seed) for arch in cfg.architectures for value in values for seed in cfg.seeds]


async def _convergence(n_list: Sequence[int], cfg: StudyConfig, out_dir: Optional[Path]) -> StudyResult:
    sizes = sorted(set(int(n) for n in n_list))
    if not sizes or sizes[0] <= 0:
        raise InputDomainError(f"training sizes must be positive, got {list(n_list)}")
    ds = _check_split(cfg)
    if sizes[-1] > len(ds.train_idx):
        raise InputDomainError(f"N={sizes[-1]} exceeds the {len(ds.train_idx)} training samples")

    cells = _grid(
        cfg,
        sizes,
        lambda arch, n, seed: StudyCell("convergence", arch, "N", float(n), seed, str(cfg.dataset), int(n), cfg.train),
    )
    return await run_cells("convergence", cells, out_dir, cfg.workers)


async def _dropout(q_list: Sequence[float], cfg: StudyConfig, out_dir: Optional[Path]) -> StudyResult:
    qs = sorted(set(float(q) for q in q_list))
    if not qs or qs[0] < 0.0 or qs[-1] > 0.5:
        raise InputDomainError(f"dropout probabilities must lie in [0, 0.5], got {list(q_list)}")
    ds = _check_split(cfg)
    n_train = min(cfg.n_train, len(ds.train_idx))

    cells = _grid(
        cfg,
        qs,
        lambda arch, q, seed: StudyCell(
            "dropout", arch, "q", q, seed, str(cfg.dataset), n_train, cfg.train.model_copy(update={"dropout": q})
        ),
    )
    return await run_cells("dropout", cells, out_dir, cfg.workers)


def ood_sets(cfg: StudyConfig, ds: Dataset, out_dir: Optional[Path], seed: int) -> List[Tuple[float, str]]:
    data_dir = Path(out_dir) if out_dir is not None else Config.cache_dir()

    # 분포 밖 세트는 데이터셋 파일로 남겨 셀 작업자가 경로로 읽는다
    evaluations = []
    for spec, ood_ds in ood_generate(cfg.bins, cfg.count_per_bin, seed, ds.ranges, cfg.solver, cfg.workers):
        ood_ds.normalization = ds.normalization
        path = save_dataset(ood_ds, data_dir / "ood" / f"bin_{spec.lower:g}_{spec.upper:g}.tdcr")
        evaluations.append((float(spec.upper), str(path)))
    return evaluations


def _ood_cells(cfg: StudyConfig, ds: Dataset, evaluations: List[Tuple[float, str]]) -> List[StudyCell]:
    n_train = min(cfg.n_train, len(ds.train_idx))
    return [
        StudyCell("ood", arch, "bin_upper", 0.0, s, str(cfg.dataset), n_train, cfg.train, tuple(evaluations))
        for arch in cfg.architectures
        for s in cfg.seeds
    ]


def convergence_study(
    n_list: Sequence[int], config: StudyConfig, out_dir: Optional[Path] = None
) -> StudyResult:
    """중첩 부분집합 N마다 (아키텍처, 시드)별로 학습하고 고정된 테스트 세트에서 채점한다."""
    return asyncio.run(_convergence(n_list, config, out_dir))


def dropout_study(q_list: Sequence[float], config: StudyConfig, out_dir: Optional[Path] = None) -> StudyResult:
    """q마다 드롭아웃을 켜고 학습, 끄고 평가한다."""
    return asyncio.run(_dropout(q_list, config, out_dir))


def ood_study(config: StudyConfig, out_dir: Optional[Path] = None) -> StudyResult:
    """(아키텍처, 시드)마다 한 번 학습하고 구간별 분포 밖 세트에서 채점한다. 값은 구간 상한(%)."""
    ds = _check_split(config)
    # 생성은 자체 이벤트 루프를 쓰므로 셀 실행 루프 밖에서 먼저 끝낸다
    evaluations = ood_sets(config, ds, out_dir, config.ood_seed)
    return asyncio.run(run_cells("ood", _ood_cells(config, ds, evaluations), out_dir, config.workers))


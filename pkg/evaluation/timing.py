# evaluation/timing.py
import copy
import csv
import logging
import platform
import statistics
import time
from pathlib import Path
from typing import Callable, List, Optional, Sequence

import numpy as np
import torch

from dataset.normalization import normalize_design
from dataset.sampling import sample_rng
from model import BenchConfig, ParameterRanges, TimingRow, TrainConfig
from neuralops.base import OperatorModel
from neuralops.factory import build_model, predict_tendons
from neuralops.gradients import TensorBatch
from training.optimizer import AdamState
from training.trainer import run_epoch

logger = logging.getLogger(__name__)

LARGE_WORKLOAD = 80_000
TIMING_COLUMNS = ("model", "workload", "seconds", "repetitions", "hardware")


def hardware_descriptor() -> str:
    cpu = platform.processor() or platform.machine()
    return f"{cpu} / {platform.system()} / torch {torch.__version__} / {torch.get_num_threads()} threads"


def median_seconds(fn: Callable[[], object], repetitions: int = 5, warmup: int = 2) -> float:
    """warmup 회는 버리고 나머지의 중앙값."""
    for _ in range(warmup):
        fn()
    samples = []
    for _ in range(repetitions):
        t0 = time.perf_counter()
        fn()
        samples.append(time.perf_counter() - t0)
    return max(statistics.median(samples), 1e-9)


def random_designs(n: int, seed: int, ranges: Optional[ParameterRanges] = None) -> np.ndarray:
    low, high = (ranges or ParameterRanges()).bounds()
    return sample_rng(seed, 0, 0xBE7C).uniform(low, high, size=(n, low.shape[0]))


def design_grids(designs: np.ndarray, n_nodes: int) -> np.ndarray:
    return np.linspace(0.0, 1.0, n_nodes)[None, :] * designs[:, 13:14]


def inference_row(model: OperatorModel, n_designs: int, cfg: BenchConfig, hardware: str) -> TimingRow:
    designs = random_designs(n_designs, cfg.seed)
    s = design_grids(designs, cfg.n_nodes)
    seconds = median_seconds(lambda: predict_tendons(model, designs, s), cfg.repetitions, cfg.warmup)
    logger.info("%s inference on %d designs: %.4f s", model.architecture, n_designs, seconds)
    return TimingRow(
        model=model.architecture,
        workload=f"infer:{n_designs}",
        seconds=seconds,
        repetitions=cfg.repetitions,
        hardware=hardware,
    )


def train_epoch_row(model: OperatorModel, n_train: int, cfg: BenchConfig, hardware: str) -> TimingRow:
    """에폭 시간은 값과 무관하므로 임의 목표값으로 잰다. 호출자의 모델은 바꾸지 않는다."""
    model = copy.deepcopy(model)
    designs = random_designs(n_train, cfg.seed)
    s = design_grids(designs, cfg.n_nodes)
    targets = sample_rng(cfg.seed, 1, 0xBE7C).standard_normal((n_train, cfg.n_nodes, 12)) * 0.01
    data = TensorBatch.from_arrays(normalize_design(designs), designs, s, targets)
    train_cfg = TrainConfig(architecture=model.architecture, seed=cfg.seed, dims=cfg.dims)
    idx = np.arange(n_train)
    adam = AdamState.zeros_like({name: p.detach() for name, p in model.named_parameters()})

    epoch = iter(range(1_000_000))
    seconds = median_seconds(
        lambda: run_epoch(model, data, idx, adam, 1e-4, train_cfg, next(epoch)), cfg.repetitions, cfg.warmup
    )
    logger.info("%s train epoch on %d designs: %.4f s", model.architecture, n_train, seconds)
    return TimingRow(
        model=model.architecture,
        workload=f"train-epoch:{n_train}",
        seconds=seconds,
        repetitions=cfg.repetitions,
        hardware=hardware,
    )


def timing_bench(cfg: BenchConfig, models: Optional[Sequence[OperatorModel]] = None) -> List[TimingRow]:
    """추론은 설계 묶음 단위, 학습은 에폭 단위 벽시계 시간. 파라미터 값과 무관하므로 무작위 초기화로도 된다."""
    if models is None:
        models = [build_model(arch, cfg.dims, cfg.seed) for arch in cfg.architectures]
    if cfg.torch_threads is not None:
        torch.set_num_threads(cfg.torch_threads)
    workloads = list(cfg.workloads) + ([LARGE_WORKLOAD] if cfg.include_large else [])
    train_sizes = list(cfg.train_sizes) + ([LARGE_WORKLOAD] if cfg.include_large else [])
    hardware = hardware_descriptor()

    rows: List[TimingRow] = []
    for model in models:
        rows += [inference_row(model, n, cfg, hardware) for n in workloads]
        rows += [train_epoch_row(model, n, cfg, hardware) for n in train_sizes]
    return rows


def write_timing(path: Path, rows: Sequence[TimingRow]) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(TIMING_COLUMNS)
        for r in rows:
            writer.writerow([r.model, r.workload, f"{r.seconds:.6g}", r.repetitions, r.hardware])
    return path

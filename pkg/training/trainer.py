# training/trainer.py
import logging
import time
from dataclasses import dataclass
from pathlib import Path
from typing import List, Optional, Sequence

import numpy as np
import torch
from tqdm import tqdm

from config.log import progress_disabled
from dataset.splits import batches
from dataset.storage import Dataset
from errors import FormatError, InputDomainError, NonFiniteError
from model import TrainConfig
from neuralops.base import OperatorModel
from neuralops.gradients import TensorBatch, loss_and_grad
from training.checkpoint import Checkpoint, save_checkpoint
from training.optimizer import AdamState, adam_step
from training.record import EpochRow, TrainRecord
from training.schedule import lr_at

logger = logging.getLogger(__name__)


class ConvergenceMonitor:
    """최근 window 에폭 평균이 그 직전 window 평균보다 threshold(상대) 미만으로 줄면 멈춘다."""

    def __init__(self, window: int, threshold: float, history: Sequence[float] = ()):
        self.window = window
        self.threshold = threshold
        self.history: List[float] = list(history)

    def update(self, value: float) -> bool:
        self.history.append(float(value))
        return self.should_stop()

    def should_stop(self) -> bool:
        w = self.window
        if len(self.history) < 2 * w:
            return False
        recent = float(np.mean(self.history[-w:]))
        previous = float(np.mean(self.history[-2 * w : -w]))
        if previous <= 0.0:
            return True
        return (previous - recent) / previous < self.threshold


@dataclass
class TrainResult:
    model: OperatorModel
    record: TrainRecord
    adam: AdamState
    epochs: int
    stopped_early: bool
    checkpoint: Optional[Path] = None


def dataset_tensors(ds: Dataset) -> TensorBatch:
    return TensorBatch.from_arrays(ds.normalized_designs, ds.designs, ds.arclengths, ds.targets)


def _batch_generator(seed: int, epoch: int, index: int) -> torch.Generator:
    state = np.random.SeedSequence([int(seed), int(epoch), int(index)]).generate_state(2, dtype=np.uint32)
    return torch.Generator().manual_seed(int(state[0]) << 32 | int(state[1]))


def per_sample_rel_l2(pred: torch.Tensor, target: torch.Tensor) -> torch.Tensor:
    diff = (pred - target).flatten(start_dim=1)
    return torch.linalg.vector_norm(diff, dim=1) / torch.linalg.vector_norm(target.flatten(start_dim=1), dim=1)


def run_epoch(
    model: OperatorModel,
    data: TensorBatch,
    train_idx: np.ndarray,
    adam: AdamState,
    lr: float,
    config: TrainConfig,
    epoch: int,
):
    """셔플된 배치마다 그래디언트 + Adam. (평균 손실, 평균 상대 l2, 새 Adam 상태)."""
    model.train()
    total_loss = 0.0
    rel_sum = 0.0
    count = 0
    for b, idx in enumerate(batches(train_idx, config.batch_size, [config.seed, epoch])):
        batch = data.take(idx)
        generator = _batch_generator(config.seed, epoch, b) if config.dropout > 0 else None
        loss, pred, grads = loss_and_grad(model, batch, config.dropout, generator)
        if not bool(torch.isfinite(loss)):
            raise NonFiniteError("loss", f"epoch {epoch}, batch {b}")

        params = {name: p.detach() for name, p in model.named_parameters()}
        new_params, adam = adam_step(params, grads, adam, lr)
        with torch.no_grad():
            for name, p in model.named_parameters():
                p.copy_(new_params[name])

        total_loss += float(loss) * len(idx)
        rel_sum += float(per_sample_rel_l2(pred, batch.targets).sum())
        count += len(idx)
    return total_loss / count, rel_sum / count, adam


def train(
    model: OperatorModel,
    dataset: Dataset,
    config: TrainConfig,
    train_idx: Optional[np.ndarray] = None,
    resume: Optional[Checkpoint] = None,
    out_dir: Optional[Path] = None,
) -> TrainResult:
    """수렴 판정 또는 max_epochs까지 학습한다. out_dir이 있으면 주기적으로 체크포인트를 남긴다."""
    torch.set_num_threads(config.torch_threads)

    if train_idx is None:
        if not dataset.has_split:
            raise InputDomainError("dataset has no train/test split")
        train_idx = dataset.train_idx
    train_idx = np.asarray(train_idx, dtype=np.int64)
    if len(train_idx) == 0:
        raise InputDomainError("training split is empty")
    if dataset.targets.shape[-1] != 12:
        raise InputDomainError("dataset targets must hold 12 tendon coordinates per node")
    if config.max_epochs > config.schedule.horizon:
        raise InputDomainError(
            f"max_epochs {config.max_epochs} exceeds the learning-rate horizon {config.schedule.horizon}"
        )

    data = dataset_tensors(dataset)
    monitor = ConvergenceMonitor(config.window(), config.stop_threshold)
    start = 0
    if resume is not None:
        if resume.adam is None:
            raise FormatError("checkpoint has no optimizer state; it can only be used for inference")
        if resume.architecture != model.architecture:
            raise InputDomainError("resume checkpoint belongs to another architecture")
        model.load_state_dict(resume.model.state_dict())
        adam = resume.adam
        start = resume.epoch
        monitor.history = list(resume.history)
    else:
        adam = AdamState.zeros_like({name: p.detach() for name, p in model.named_parameters()})

    out_dir = Path(out_dir) if out_dir is not None else None
    record = TrainRecord(out_dir / "train_record.csv" if out_dir is not None else None)
    ckpt_path = out_dir / f"{model.architecture}.ckpt" if out_dir is not None else None
    last_good: Optional[Path] = None

    def checkpoint(next_epoch: int) -> Optional[Path]:
        if ckpt_path is None:
            return None
        return save_checkpoint(
            ckpt_path,
            model,
            adam,
            next_epoch,
            monitor.history,
            dataset.normalization,
            {"train_config": config.model_dump(mode="json"), "n_train": int(len(train_idx))},
        )

    stopped = False
    epoch = start
    bar = tqdm(range(start, config.max_epochs), desc=model.architecture, disable=progress_disabled(), leave=False)
    for epoch in bar:
        t0 = time.perf_counter()
        lr = lr_at(config.schedule, epoch)
        try:
            loss, rel, adam = run_epoch(model, data, train_idx, adam, lr, config, epoch)
        except NonFiniteError as e:
            raise NonFiniteError(e.block, f"{e}; last good checkpoint: {last_good or 'none'}") from e
        record.append(EpochRow(epoch, loss, rel, lr, time.perf_counter() - t0))
        stopped = monitor.update(rel)
        bar.set_postfix(rel_l2=f"{rel:.4f}")

        if (epoch + 1) % config.checkpoint_every == 0:
            last_good = checkpoint(epoch + 1)
        if stopped:
            logger.info("%s converged at epoch %d (rel-l2 %.4e)", model.architecture, epoch, rel)
            break
    else:
        epoch = config.max_epochs - 1

    final = checkpoint(epoch + 1)
    return TrainResult(model, record, adam, epoch + 1, stopped, final)

# evaluation/metrics.py
import logging
from typing import Optional, Sequence

import numpy as np

from dataset.storage import Dataset
from errors import InputDomainError, UndefinedMetricError
from model import EvalReport, ModelScore
from neuralops.base import OperatorModel
from neuralops.factory import predict_tendons

logger = logging.getLogger(__name__)


def relative_l2(y, y_hat) -> float:
    """‖y − ŷ‖₂ / ‖y‖₂ (평탄화)."""
    y = np.asarray(y, dtype=np.float64)
    y_hat = np.asarray(y_hat, dtype=np.float64)
    if y.shape != y_hat.shape:
        raise InputDomainError(f"shape mismatch {y.shape} vs {y_hat.shape}")
    denom = float(np.linalg.norm(y.ravel()))
    if denom == 0.0:
        raise UndefinedMetricError("relative l2 error is undefined for a zero target")
    return float(np.linalg.norm((y - y_hat).ravel())) / denom


def per_sample_errors(targets: np.ndarray, preds: np.ndarray) -> np.ndarray:
    flat_t = targets.reshape(targets.shape[0], -1)
    flat_p = preds.reshape(preds.shape[0], -1)
    denom = np.linalg.norm(flat_t, axis=1)
    if np.any(denom == 0.0):
        raise UndefinedMetricError(f"zero target in sample {int(np.argmin(denom))}")
    return np.linalg.norm(flat_t - flat_p, axis=1) / denom


def node_profile(targets: np.ndarray, preds: np.ndarray) -> np.ndarray:
    """노드별 평균 상대 오차 (N, n, 12) → (n,)."""
    denom = np.linalg.norm(targets, axis=-1)
    if np.any(denom == 0.0):
        raise UndefinedMetricError("zero target at some node")
    return (np.linalg.norm(targets - preds, axis=-1) / denom).mean(axis=0)


def heldout_error(model: OperatorModel, ds: Dataset, idx: Optional[np.ndarray] = None):
    """(평균 상대 l2, 노드 프로파일). 포즈 모델도 텐던 공간에서 채점한다."""
    idx = ds.test_idx if idx is None else np.asarray(idx)
    if len(idx) == 0:
        raise InputDomainError("evaluation set is empty")
    preds = predict_tendons(model, ds.designs[idx], ds.arclengths[idx], ds.normalization)
    targets = ds.targets[idx]
    return float(per_sample_errors(targets, preds).mean()), node_profile(targets, preds)


def evaluate_model(
    models: Sequence[OperatorModel], ds: Dataset, architecture: Optional[str] = None
) -> EvalReport:
    """시드별 모델의 테스트 오차와 그 평균."""
    if not models:
        raise InputDomainError("no models to evaluate")
    architecture = architecture or models[0].architecture
    errors = []
    profiles = []
    for model in models:
        if model.architecture != architecture:
            raise InputDomainError(f"mixed architectures: {model.architecture} vs {architecture}")
        err, profile = heldout_error(model, ds)
        logger.info("%s seed %d: relative l2 %.4e", architecture, model.seed, err)
        errors.append(err)
        profiles.append(profile)

    score = ModelScore.from_errors(architecture, errors, np.mean(profiles, axis=0))
    return EvalReport(models={architecture: score}, n_test=int(len(ds.test_idx)))


def merge_reports(reports: Sequence[EvalReport], dataset: Optional[str] = None) -> EvalReport:
    merged = EvalReport(dataset=dataset)
    for r in reports:
        merged.models.update(r.models)
        merged.n_test = r.n_test
    return merged

# neuralops/factory.py
from typing import Optional, Sequence, Union

import numpy as np
import torch

from dataset.normalization import normalize_design
from errors import FrameDegeneracyError, InputDomainError
from model import ARCHITECTURES, DesignVector, ModelDims, NormalizationSpec
from neuralops.base import OperatorModel
from neuralops.deeponet import DeepONet
from neuralops.fno import FNO
from neuralops.gradients import TensorBatch, tendon_predictions

INFERENCE_CHUNK = 4096


def build_model(architecture: str, dims: Optional[ModelDims] = None, seed: int = 0) -> OperatorModel:
    if architecture not in ARCHITECTURES:
        raise InputDomainError(f"unknown architecture '{architecture}' (expected one of {', '.join(ARCHITECTURES)})")
    cls = FNO if architecture.startswith("fno") else DeepONet
    return cls(architecture, dims or ModelDims(), seed)


def count_parameters(model: torch.nn.Module) -> int:
    """학습 가능한 실수 파라미터 수 (복소 스펙트럴 가중치는 실수부/허수부 2개로 센다)."""
    return sum(p.numel() for p in model.parameters() if p.requires_grad)


def predict_tendons(
    model: OperatorModel,
    designs: np.ndarray,
    arclengths: np.ndarray,
    spec: Optional[NormalizationSpec] = None,
    chunk: int = INFERENCE_CHUNK,
) -> np.ndarray:
    """원시 설계 (N, 15)와 격자 (N, n)에서 텐던 곡선 (N, n, 12). 추론은 청크 단위, 엄격한 Gram-Schmidt."""
    spec = spec or NormalizationSpec()
    designs = np.atleast_2d(np.asarray(designs, dtype=np.float64))
    arclengths = np.asarray(arclengths, dtype=np.float64)
    if arclengths.ndim == 1:
        arclengths = np.broadcast_to(arclengths, (designs.shape[0], arclengths.shape[0]))
    d_norm = normalize_design(designs, spec)

    model.eval()
    out = np.empty(arclengths.shape + (12,))
    with torch.no_grad():
        for start in range(0, designs.shape[0], chunk):
            stop = start + chunk
            dummy = np.zeros(arclengths[start:stop].shape + (12,))
            batch = TensorBatch.from_arrays(d_norm[start:stop], designs[start:stop], arclengths[start:stop], dummy)
            try:
                out[start:stop] = tendon_predictions(model, batch, strict=True).numpy()
            except FrameDegeneracyError as e:
                local = e.sample_index or 0
                raise FrameDegeneracyError("degenerate predicted frame", start + local) from e
    return out


def predict_tendon_curves(
    model: OperatorModel,
    design: Union[DesignVector, np.ndarray],
    s_grid: Sequence[float],
    spec: Optional[NormalizationSpec] = None,
) -> np.ndarray:
    """임의 해상도 질의. 결과 shape (N_t, n, 3).

    DeepONet은 어떤 호장 점에서도, FNO는 n ≥ 2·modes 인 등간격 격자에서 평가한다.
    """
    raw = design.to_array() if isinstance(design, DesignVector) else np.asarray(design, dtype=np.float64)
    s_grid = np.asarray(s_grid, dtype=np.float64)
    if isinstance(model, FNO):
        steps = np.diff(s_grid)
        if s_grid.size < 2 or not np.allclose(steps, steps[0], rtol=1e-9, atol=1e-15):
            raise InputDomainError("FNO queries need an equispaced arclength grid")
    curves = predict_tendons(model, raw[None], s_grid[None], spec)[0]
    return curves.reshape(s_grid.size, -1, 3).transpose(1, 0, 2)

# neuralops/gradients.py
from dataclasses import dataclass
from typing import Dict, Optional, Sequence, Tuple

import numpy as np
import torch

from errors import NonFiniteError
from neuralops.base import OperatorModel
from neuralops.frames import pose_outputs_to_tendons
from neuralops.losses import loss_tendon


@dataclass
class TensorBatch:
    d_norm: torch.Tensor  # (B, 15)
    designs: torch.Tensor  # (B, 15) 원시값
    s: torch.Tensor  # (B, n)
    targets: torch.Tensor  # (B, n, 12)

    def __len__(self) -> int:
        return int(self.d_norm.shape[0])

    def take(self, idx: Sequence[int]) -> "TensorBatch":
        idx = torch.as_tensor(np.asarray(idx), dtype=torch.long)
        return TensorBatch(self.d_norm[idx], self.designs[idx], self.s[idx], self.targets[idx])

    @classmethod
    def from_arrays(cls, d_norm, designs, s, targets) -> "TensorBatch":
        as_t = lambda a: torch.as_tensor(np.ascontiguousarray(a), dtype=torch.float64)
        return cls(as_t(d_norm), as_t(designs), as_t(s), as_t(targets))


def tendon_predictions(
    model: OperatorModel,
    batch: TensorBatch,
    dropout: float = 0.0,
    generator: Optional[torch.Generator] = None,
    strict: bool = False,
) -> torch.Tensor:
    """모델 출력을 텐던 공간 (B, n, 12)로. 포즈 변형은 Gram-Schmidt + 재구성을 거친다."""
    out = model(batch.d_norm, batch.s, dropout, generator)
    if model.is_pose:
        return pose_outputs_to_tendons(out, batch.designs, batch.s, strict=strict)
    return out


def loss_and_grad(
    model: OperatorModel,
    batch: TensorBatch,
    dropout: float = 0.0,
    generator: Optional[torch.Generator] = None,
    scale: float = 1.0,
) -> Tuple[torch.Tensor, torch.Tensor, Dict[str, torch.Tensor]]:
    """배치 손실, 텐던 공간 예측(분리됨), 파라미터별 그래디언트."""
    names, params = zip(*model.named_parameters())
    pred = tendon_predictions(model, batch, dropout, generator, strict=False)
    loss = scale * loss_tendon(pred, batch.targets)
    grads = torch.autograd.grad(loss, params, allow_unused=True)

    tree: Dict[str, torch.Tensor] = {}
    for name, param, g in zip(names, params, grads):
        g = torch.zeros_like(param) if g is None else g
        if not bool(torch.isfinite(g).all()):
            raise NonFiniteError(name, "gradient")
        tree[name] = g
    return loss.detach(), pred.detach(), tree


def grad(
    model: OperatorModel,
    batch: TensorBatch,
    dropout: float = 0.0,
    generator: Optional[torch.Generator] = None,
    scale: float = 1.0,
) -> Dict[str, torch.Tensor]:
    """역전파 그래디언트. 트리 구조는 model.named_parameters()와 같다."""
    return loss_and_grad(model, batch, dropout, generator, scale)[2]

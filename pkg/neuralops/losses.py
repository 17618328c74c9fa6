# neuralops/losses.py
import torch

from neuralops.frames import pose_outputs_to_tendons


def loss_tendon(pred: torch.Tensor, target: torch.Tensor) -> torch.Tensor:
    """노드(와 배치) 평균의 Σ_i ‖r_i − r̃_i‖². 12채널 제곱합 = 4개 텐던 거리 제곱합."""
    if pred.shape != target.shape:
        raise ValueError(f"prediction shape {tuple(pred.shape)} does not match target {tuple(target.shape)}")
    return ((pred - target) ** 2).sum(dim=-1).mean()


def loss_pose(
    pose_pred: torch.Tensor, target: torch.Tensor, designs: torch.Tensor, s: torch.Tensor, strict: bool = False
) -> torch.Tensor:
    """Gram-Schmidt로 프레임을 만든 뒤 텐던 공간에서 loss_tendon과 같은 축약."""
    return loss_tendon(pose_outputs_to_tendons(pose_pred, designs, s, strict=strict), target)

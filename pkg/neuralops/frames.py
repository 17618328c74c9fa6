# neuralops/frames.py
import math

import torch

from config.settings import Config
from errors import FrameDegeneracyError


def gram_schmidt_frame(a1: torch.Tensor, a2: torch.Tensor, strict: bool = True, eps: float = Config.GS_EPS) -> torch.Tensor:
    """두 열 벡터를 정규직교화하고 외적으로 세 번째 열을 만든다. (..., 3, 3), 열 = (ê1, ê2, ê3).

    strict=False(학습)에서는 분모에 eps를 더해 퇴화 출력에서도 그래디언트가 유한하다.
    """
    n1 = torch.linalg.vector_norm(a1, dim=-1, keepdim=True)
    if strict:
        _check(n1, eps, "first frame column")
        e1 = a1 / n1
    else:
        e1 = a1 / (n1 + eps)

    w = a2 - (e1 * a2).sum(dim=-1, keepdim=True) * e1
    n2 = torch.linalg.vector_norm(w, dim=-1, keepdim=True)
    if strict:
        _check(n2, eps, "second frame column")
        e2 = w / n2
    else:
        e2 = w / (n2 + eps)

    e3 = torch.linalg.cross(e1, e2, dim=-1)
    return torch.stack([e1, e2, e3], dim=-1)


def _check(norms: torch.Tensor, eps: float, what: str) -> None:
    bad = norms[..., 0] <= eps
    if bool(bad.any()):
        index = torch.nonzero(bad)[0]
        sample = int(index[0]) if index.numel() >= 1 else None
        raise FrameDegeneracyError(f"degenerate {what} (norm <= {eps:g})", sample)


def tendon_offsets(designs: torch.Tensor, s: torch.Tensor, phase: float = 0.0) -> torch.Tensor:
    """원시 설계 (B, 15)와 격자 (B, n) 또는 (n,)에서 ρ_i(s). shape (B, n, N_t, 3)."""
    n_t = Config.N_TENDONS
    if s.dim() == 1:
        s = s.unsqueeze(0).expand(designs.shape[0], -1)
    rho = designs[:, 0:n_t]
    pitch = designs[:, n_t : 2 * n_t]
    psi = 2.0 * math.pi * torch.arange(n_t, dtype=designs.dtype) / n_t + phase
    theta = psi + pitch.unsqueeze(1) * s.unsqueeze(-1)
    radius = rho.unsqueeze(1)
    return torch.stack([radius * torch.cos(theta), radius * torch.sin(theta), torch.zeros_like(theta)], dim=-1)


def pose_to_tendons(
    position: torch.Tensor, frames: torch.Tensor, designs: torch.Tensor, s: torch.Tensor, phase: float = 0.0
) -> torch.Tensor:
    """텐던 i 위치 = r̃(s) + R̃(s)ρ_i(s). position (B, n, 3), frames (B, n, 3, 3) → (B, n, 12)."""
    rho = tendon_offsets(designs, s, phase)
    curves = position.unsqueeze(-2) + torch.einsum("bnij,bntj->bnti", frames, rho)
    return curves.flatten(start_dim=-2)


def split_pose(outputs: torch.Tensor):
    """9채널 출력 (r̃, a1, a2)."""
    return outputs[..., 0:3], outputs[..., 3:6], outputs[..., 6:9]


def pose_outputs_to_tendons(
    outputs: torch.Tensor, designs: torch.Tensor, s: torch.Tensor, strict: bool = True, phase: float = 0.0
) -> torch.Tensor:
    position, a1, a2 = split_pose(outputs)
    frames = gram_schmidt_frame(a1, a2, strict=strict)
    return pose_to_tendons(position, frames, designs, s, phase)


def pose_from_frames(position: torch.Tensor, frames: torch.Tensor) -> torch.Tensor:
    """정답 프레임을 9채널 포즈로 바꾼다 (a1, a2 = 앞의 두 열)."""
    return torch.cat([position, frames[..., :, 0], frames[..., :, 1]], dim=-1)

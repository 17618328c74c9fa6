# neuralops/base.py
from typing import Optional

import torch
import torch.nn as nn

from config.settings import Config
from model import ModelDims, is_pose, output_channels


class OperatorModel(nn.Module):
    """설계 벡터(정규화) + 호장 격자 → 노드별 c채널 출력."""

    architecture: str = ""

    def __init__(self, architecture: str, dims: ModelDims, seed: int):
        super().__init__()
        self.architecture = architecture
        self.dims = dims
        self.seed = seed
        self.channels = output_channels(architecture)
        self.design_dim = Config.DESIGN_DIM

    @property
    def is_pose(self) -> bool:
        return is_pose(self.architecture)

    def init_generator(self) -> torch.Generator:
        return torch.Generator().manual_seed(int(self.seed))

    def forward(
        self,
        d_norm: torch.Tensor,
        s: torch.Tensor,
        dropout: float = 0.0,
        generator: Optional[torch.Generator] = None,
    ) -> torch.Tensor:
        raise NotImplementedError

    @staticmethod
    def broadcast_grid(d_norm: torch.Tensor, s: torch.Tensor) -> torch.Tensor:
        """격자 s를 (B, n)으로 맞춘다. 1차원이면 모든 설계가 공유한다."""
        if s.dim() == 1:
            return s.unsqueeze(0).expand(d_norm.shape[0], -1)
        return s

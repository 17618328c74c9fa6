# neuralops/fno.py
from typing import Optional

import torch
import torch.nn as nn

from errors import InputDomainError
from model import ModelDims
from neuralops.base import OperatorModel
from neuralops.layers import FourierLayer, apply_dropout, glorot_linear


class FNO(OperatorModel):
    """P ∘ A_L ∘ σ ∘ … ∘ σ ∘ A_1 ∘ lift. 노드 j의 입력 채널은 (d_norm, s_j) 16개."""

    def __init__(self, architecture: str = "fno", dims: Optional[ModelDims] = None, seed: int = 0):
        dims = dims or ModelDims()
        super().__init__(architecture, dims, seed)
        g = self.init_generator()
        self.width = dims.fno_width
        self.modes = dims.fno_modes
        self.lift = glorot_linear(self.design_dim + 1, self.width, g)
        self.layers = nn.ModuleList(FourierLayer(self.width, self.modes, g) for _ in range(dims.fno_layers))
        self.project = glorot_linear(self.width, self.channels, g)

    def lift_inputs(self, d_norm: torch.Tensor, s: torch.Tensor) -> torch.Tensor:
        s = self.broadcast_grid(d_norm, s)
        n = s.shape[-1]
        d = d_norm.unsqueeze(1).expand(-1, n, -1)
        return torch.cat([d, s.unsqueeze(-1)], dim=-1)

    def forward(
        self,
        d_norm: torch.Tensor,
        s: torch.Tensor,
        dropout: float = 0.0,
        generator: Optional[torch.Generator] = None,
    ) -> torch.Tensor:
        if d_norm.shape[-1] != self.design_dim:
            raise InputDomainError(f"expected {self.design_dim} design inputs, got {d_norm.shape[-1]}")
        x = self.lift(self.lift_inputs(d_norm, s))
        last = len(self.layers) - 1
        for i, layer in enumerate(self.layers):
            x = layer(x)
            if i < last:
                x = apply_dropout(torch.relu(x), dropout, generator, self.training)
        return self.project(x)

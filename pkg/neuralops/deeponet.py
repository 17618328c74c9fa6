# neuralops/deeponet.py
from typing import Optional

import torch

from errors import InputDomainError
from model import ModelDims
from neuralops.base import OperatorModel
from neuralops.layers import Mlp


class DeepONet(OperatorModel):
    """stacked DeepONet. 채널 k의 출력은 브랜치/트렁크 (c, p) 블록의 k번째 행끼리의 내적이다.

    출력 편향은 없다.
    """

    def __init__(self, architecture: str = "deeponet", dims: Optional[ModelDims] = None, seed: int = 0):
        dims = dims or ModelDims()
        super().__init__(architecture, dims, seed)
        g = self.init_generator()
        width = self.channels * dims.basis
        depth = dims.mlp_layers
        self.basis = dims.basis
        self.branch = Mlp([self.design_dim] + [dims.branch_hidden] * (depth - 1) + [width], generator=g)
        self.trunk = Mlp([1] + [dims.trunk_hidden] * (depth - 1) + [width], generator=g)

    def encode(
        self, d_norm: torch.Tensor, dropout: float = 0.0, generator: Optional[torch.Generator] = None
    ) -> torch.Tensor:
        """브랜치 계수 β(d), shape (B, c, p). 격자와 무관하다."""
        return self.branch(d_norm, dropout, generator).view(-1, self.channels, self.basis)

    def trunk_basis(self, s: torch.Tensor) -> torch.Tensor:
        """트렁크 기저 T(s), shape (..., n, c, p)."""
        out = self.trunk(s.unsqueeze(-1))
        return out.view(*s.shape, self.channels, self.basis)

    def combine(self, coeff: torch.Tensor, s: torch.Tensor, dropout: float = 0.0, generator=None) -> torch.Tensor:
        """Σ_ℓ β[k,ℓ]·T(s)[k,ℓ].

        트렁크 마지막 층이 선형이므로 β를 먼저 가중치에 접어 (B, n, c, p) 텐서를 만들지 않는다.
        """
        h = self.trunk.hidden(s.unsqueeze(-1), dropout, generator)
        W = self.trunk.last.weight.view(self.channels, self.basis, -1)
        b = self.trunk.last.bias.view(self.channels, self.basis)
        folded = torch.einsum("bcp,cph->bch", coeff, W)
        offset = torch.einsum("bcp,cp->bc", coeff, b)
        if h.dim() == 2:
            return torch.einsum("nh,bch->bnc", h, folded) + offset.unsqueeze(1)
        return torch.einsum("bnh,bch->bnc", h, folded) + offset.unsqueeze(1)

    def forward(
        self,
        d_norm: torch.Tensor,
        s: torch.Tensor,
        dropout: float = 0.0,
        generator: Optional[torch.Generator] = None,
    ) -> torch.Tensor:
        if d_norm.shape[-1] != self.design_dim:
            raise InputDomainError(f"expected {self.design_dim} design inputs, got {d_norm.shape[-1]}")
        if s.dim() == 2 and s.shape[0] != d_norm.shape[0]:
            raise InputDomainError("per-design grids must match the design batch")
        coeff = self.encode(d_norm, dropout, generator)
        return self.combine(coeff, s, dropout, generator)

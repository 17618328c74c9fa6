# neuralops/layers.py
import math
from typing import Callable, Optional, Sequence

import torch
import torch.nn as nn

from errors import InputDomainError

DTYPE = torch.float64


def glorot_linear(fan_in: int, fan_out: int, generator: Optional[torch.Generator] = None) -> nn.Linear:
    layer = nn.Linear(fan_in, fan_out, dtype=DTYPE)
    nn.init.xavier_uniform_(layer.weight, generator=generator)
    # s=0에서 포즈 출력이 0이 되지 않도록 편향도 무작위로 둔다
    bound = 1.0 / math.sqrt(fan_in)
    nn.init.uniform_(layer.bias, -bound, bound, generator=generator)
    return layer


def apply_dropout(
    x: torch.Tensor, q: float, generator: Optional[torch.Generator] = None, training: bool = True
) -> torch.Tensor:
    """역 드롭아웃: 학습 중에는 확률 q로 0, 남은 값은 1/(1−q)배. 추론 시 항등."""
    if not 0.0 <= q < 1.0:
        raise InputDomainError(f"dropout rate must lie in [0, 1), got {q}")
    if not training or q == 0.0:
        return x
    keep = torch.rand(x.shape, generator=generator, dtype=x.dtype) >= q
    return x * keep / (1.0 - q)


class Mlp(nn.Module):
    """affine → tanh 체인. 마지막 층은 활성화하지 않는다."""

    def __init__(
        self,
        sizes: Sequence[int],
        activation: Callable[[torch.Tensor], torch.Tensor] = torch.tanh,
        generator: Optional[torch.Generator] = None,
    ):
        super().__init__()
        if len(sizes) < 2:
            raise InputDomainError("an MLP needs at least input and output widths")
        self.sizes = tuple(int(s) for s in sizes)
        self.activation = activation
        self.layers = nn.ModuleList(glorot_linear(a, b, generator) for a, b in zip(self.sizes[:-1], self.sizes[1:]))

    def hidden(
        self, x: torch.Tensor, dropout: float = 0.0, generator: Optional[torch.Generator] = None
    ) -> torch.Tensor:
        """마지막 층 직전까지의 활성값. 은닉층 사이마다 드롭아웃을 넣는다."""
        if x.shape[-1] != self.sizes[0]:
            raise InputDomainError(f"expected input width {self.sizes[0]}, got {x.shape[-1]}")
        for layer in self.layers[:-1]:
            x = apply_dropout(self.activation(layer(x)), dropout, generator, self.training)
        return x

    @property
    def last(self) -> nn.Linear:
        return self.layers[-1]

    def forward(
        self, x: torch.Tensor, dropout: float = 0.0, generator: Optional[torch.Generator] = None
    ) -> torch.Tensor:
        return self.last(self.hidden(x, dropout, generator))


def mlp_forward(mlp: Mlp, x: torch.Tensor) -> torch.Tensor:
    return mlp(x)


class FourierLayer(nn.Module):
    """스펙트럴 경로 + 점별 선형 경로.

    rfft는 정규화하지 않고 irfft가 1/n을 곱한다. 주파수 0..modes−1만 남긴다.
    복소 가중치는 실수 텐서 (modes, in, out, 2)로 저장한다.
    """

    def __init__(self, width: int, modes: int, generator: Optional[torch.Generator] = None):
        super().__init__()
        self.width = width
        self.modes = modes
        scale = 1.0 / (width * width)
        self.spectral = nn.Parameter(scale * torch.rand(modes, width, width, 2, generator=generator, dtype=DTYPE))
        self.pointwise = glorot_linear(width, width, generator)

    def spectral_path(self, x: torch.Tensor) -> torch.Tensor:
        n = x.shape[-2]
        if n < 2 * self.modes:
            raise InputDomainError(f"{n} nodes cannot carry {self.modes} Fourier modes (need n >= {2 * self.modes})")
        coeffs = torch.fft.rfft(x, dim=-2)
        weights = torch.view_as_complex(self.spectral)
        kept = torch.einsum("...mi,mio->...mo", coeffs[..., : self.modes, :], weights)
        zeros = kept.new_zeros(kept.shape[:-2] + (coeffs.shape[-2] - self.modes, self.width))
        return torch.fft.irfft(torch.cat([kept, zeros], dim=-2), n=n, dim=-2)

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        return self.spectral_path(x) + self.pointwise(x)


def fourier_layer(x: torch.Tensor, layer: FourierLayer) -> torch.Tensor:
    return layer(x)

# training/optimizer.py
from dataclasses import dataclass
from typing import Dict, Tuple

import torch

from errors import InputDomainError, NonFiniteError

Tree = Dict[str, torch.Tensor]


@dataclass
class AdamState:
    m: Tree
    v: Tree
    t: int = 0
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8

    @classmethod
    def zeros_like(cls, params: Tree, **hyper) -> "AdamState":
        return cls(
            m={k: torch.zeros_like(p) for k, p in params.items()},
            v={k: torch.zeros_like(p) for k, p in params.items()},
            **hyper,
        )


def adam_step(params: Tree, grads: Tree, state: AdamState, lr: float) -> Tuple[Tree, AdamState]:
    """순수 함수형 Adam. 새 파라미터와 새 상태를 돌려주고 입력은 건드리지 않는다."""
    if lr <= 0:
        raise InputDomainError(f"learning rate must be positive, got {lr}")
    if params.keys() != grads.keys():
        raise InputDomainError("parameter and gradient trees differ")

    t = state.t + 1
    b1, b2 = state.beta1, state.beta2
    c1 = 1.0 - b1**t
    c2 = 1.0 - b2**t

    new_params: Tree = {}
    new_m: Tree = {}
    new_v: Tree = {}
    with torch.no_grad():
        for name, p in params.items():
            g = grads[name]
            m = b1 * state.m[name] + (1.0 - b1) * g
            v = b2 * state.v[name] + (1.0 - b2) * g * g
            update = lr * (m / c1) / (torch.sqrt(v / c2) + state.eps)
            if not bool(torch.isfinite(update).all()):
                raise NonFiniteError(name, f"Adam update at step {t}")
            new_params[name] = p - update
            new_m[name] = m
            new_v[name] = v

    return new_params, AdamState(new_m, new_v, t, b1, b2, state.eps)

# rodmodel/integrator.py
from typing import List, Optional

import numpy as np

from errors import InputDomainError, IntegrationBlowupError
from model import DesignVector, SolverConfig
from rodmodel.state import RodState, reorthonormalize
from rodmodel.statics import TendonRod


def arclength_grid(length: float, steps: int) -> np.ndarray:
    return np.linspace(0.0, length, steps + 1)


def rk4(rod: TendonRod, Y0: np.ndarray, steps: int, keep_path: bool = True) -> np.ndarray:
    """고정 간격 RK4. 매 스텝 후 프레임을 회전 행렬로 재직교화한다.

    keep_path=True면 (steps+1, B, 18), 아니면 팁 상태 (B, 18)을 돌려준다.
    """
    if steps < 1:
        raise InputDomainError(f"steps must be at least 1, got {steps}")
    grid = arclength_grid(rod.length, steps)
    h = rod.length / steps

    Y = np.array(Y0, dtype=np.float64, copy=True)
    path = np.empty((steps + 1,) + Y.shape) if keep_path else None
    if keep_path:
        path[0] = Y

    for k in range(steps):
        s = grid[k]
        k1 = rod.rhs(s, Y)
        k2 = rod.rhs(s + 0.5 * h, Y + 0.5 * h * k1)
        k3 = rod.rhs(s + 0.5 * h, Y + 0.5 * h * k2)
        k4 = rod.rhs(grid[k + 1], Y + h * k3)
        Y = reorthonormalize(Y + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4))
        if not np.all(np.isfinite(Y)):
            raise IntegrationBlowupError(float(grid[k + 1]))
        if keep_path:
            path[k + 1] = Y

    return path if keep_path else Y


def integrate_ivp(
    base: RodState,
    design: DesignVector,
    steps: int,
    config: Optional[SolverConfig] = None,
    tension_scale: float = 1.0,
) -> List[RodState]:
    """고정단 초기값 문제를 적분해 모든 격자 노드의 상태를 돌려준다."""
    if base.s != 0.0 or np.linalg.norm(base.r) > 1e-12 or np.linalg.norm(base.R - np.eye(3)) > 1e-12:
        raise InputDomainError("integration starts from the clamped base: s=0, r=0, R=I")

    rod = TendonRod(design, config, tension_scale)
    path = rk4(rod, base.to_vector()[None], steps)
    grid = arclength_grid(rod.length, steps)
    return [RodState.from_vector(path[k, 0], grid[k]) for k in range(steps + 1)]

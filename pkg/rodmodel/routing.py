# rodmodel/routing.py
import numpy as np

from config.settings import Config
from errors import InputDomainError
from model import DesignVector


def base_angles(n_tendons: int = Config.N_TENDONS, phase: float = 0.0) -> np.ndarray:
    """디스크 위 텐던 기저 각도 ψ_i = 2π(i−1)/N_t + phase."""
    return 2.0 * np.pi * np.arange(n_tendons) / n_tendons + phase


def routing_terms(offsets: np.ndarray, pitches: np.ndarray, angles: np.ndarray, s: float):
    """모든 텐던의 ρ_i(s)와 그 1, 2계 호장 미분. 각각 (N_t, 3)."""
    theta = angles + pitches * s
    c, sn = np.cos(theta), np.sin(theta)
    zero = np.zeros_like(theta)
    rho = np.stack([offsets * c, offsets * sn, zero], axis=-1)
    w = offsets * pitches
    d1 = np.stack([-w * sn, w * c, zero], axis=-1)
    w2 = w * pitches
    d2 = np.stack([-w2 * c, -w2 * sn, zero], axis=-1)
    return rho, d1, d2


def offsets_along(offsets: np.ndarray, pitches: np.ndarray, angles: np.ndarray, s_grid: np.ndarray) -> np.ndarray:
    """격자 위 ρ_i(s_k). shape (N_t, n, 3)."""
    s_grid = np.asarray(s_grid, dtype=np.float64)
    theta = angles[:, None] + pitches[:, None] * s_grid[None, :]
    return np.stack(
        [offsets[:, None] * np.cos(theta), offsets[:, None] * np.sin(theta), np.zeros_like(theta)],
        axis=-1,
    )


def tendon_offset_vector(design: DesignVector, i: int, s: float, phase: float = 0.0) -> np.ndarray:
    """i번째 텐던(1부터 시작)의 바디 프레임 오프셋 ρ_i(s)."""
    if not 1 <= i <= Config.N_TENDONS:
        raise InputDomainError(f"tendon index must lie in 1..{Config.N_TENDONS}, got {i}")
    length = design.backbone_length
    if not (0.0 <= s <= length * (1.0 + 1e-12)):
        raise InputDomainError(f"arclength {s} outside [0, {length}]")

    angle = 2.0 * np.pi * (i - 1) / Config.N_TENDONS + phase
    theta = angle + design.tendon_pitches[i - 1] * s
    rho = design.tendon_offsets[i - 1]
    return np.array([rho * np.cos(theta), rho * np.sin(theta), 0.0])

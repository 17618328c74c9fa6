# rodmodel/shooting.py
"""슈팅법: 기저 하중 (n0, m0) 6개 미지수에 대한 감쇠 뉴턴 + 장력 호모토피."""
import logging
from dataclasses import dataclass, field, replace
from typing import List, Optional, Sequence

import numpy as np

from config.settings import Config
from errors import IntegrationBlowupError, NonConvergenceError, SolverDegeneracyError
from model import DesignVector, SolverConfig
from rodmodel.integrator import arclength_grid, rk4
from rodmodel.routing import offsets_along
from rodmodel.state import clamped_states, unpack
from rodmodel.statics import TendonRod
from workers import run_parallel

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class EquilibriumConfig:
    arclengths: np.ndarray  # (n,)
    backbone: np.ndarray  # (n, 3)
    frames: np.ndarray  # (n, 3, 3)
    tendon_curves: np.ndarray  # (N_t, n, 3)
    internal_force: np.ndarray  # (n, 3)
    internal_moment: np.ndarray  # (n, 3)
    base_loads: np.ndarray  # (6,)
    residual_norm: float
    iterations: int
    used_homotopy: bool
    design: Optional[DesignVector] = None
    steps: int = field(default=Config.PRODUCTION_STEPS)

    @property
    def n_nodes(self) -> int:
        return int(self.arclengths.shape[0])

    @property
    def tip(self) -> np.ndarray:
        return self.backbone[-1]

    def targets(self) -> np.ndarray:
        """노드별 12값 (텐던 1..4 순서로 x, y, z)."""
        return self.tendon_curves.transpose(1, 0, 2).reshape(self.n_nodes, -1)

    def subsample(self, n_nodes: int = Config.N_NODES) -> "EquilibriumConfig":
        """등간격 n_nodes개 노드만 남긴다. steps가 (n_nodes−1)의 배수여야 한다."""
        intervals = n_nodes - 1
        if intervals < 1 or self.steps % intervals != 0:
            raise ValueError(f"cannot take {n_nodes} nodes from a {self.steps}-step solution")
        stride = self.steps // intervals
        idx = np.arange(0, self.steps + 1, stride)
        return replace(
            self,
            arclengths=self.arclengths[idx],
            backbone=self.backbone[idx],
            frames=self.frames[idx],
            tendon_curves=self.tendon_curves[:, idx],
            internal_force=self.internal_force[idx],
            internal_moment=self.internal_moment[idx],
            steps=intervals,
        )


@dataclass
class NewtonResult:
    x: np.ndarray
    residual_norm: float
    iterations: int
    converged: bool


def _residuals(rod: TendonRod, X: np.ndarray, steps: int) -> np.ndarray:
    Y_tip = rk4(rod, clamped_states(X), steps, keep_path=False)
    force, moment = rod.tip_loads(Y_tip)
    _, _, n, m = unpack(Y_tip)
    return np.concatenate([n + force, m + moment], axis=1)


def tip_residual(
    base_loads,
    design: DesignVector,
    config: Optional[SolverConfig] = None,
    tension_scale: float = 1.0,
) -> np.ndarray:
    """팁 경계조건 위반량 [n(L) + Στt(L); m(L) + Σ(Rρ)×τt(L)]."""
    config = config or SolverConfig()
    rod = TendonRod(design, config, tension_scale)
    X = np.asarray(base_loads, dtype=np.float64).reshape(1, 6)
    return _residuals(rod, X, config.steps)[0]


def _try_residual(rod: TendonRod, x: np.ndarray, steps: int) -> Optional[np.ndarray]:
    try:
        F = _residuals(rod, x[None], steps)[0]
    except (IntegrationBlowupError, SolverDegeneracyError):
        return None
    return F if np.all(np.isfinite(F)) else None


def newton_shoot(rod: TendonRod, x0: np.ndarray, config: SolverConfig) -> NewtonResult:
    """전진 차분 야코비안과 Armijo 백트래킹을 쓰는 감쇠 뉴턴법."""
    x = np.array(x0, dtype=np.float64, copy=True)
    F = _residuals(rod, x[None], config.steps)[0]
    norm = float(np.linalg.norm(F))
    best = NewtonResult(x.copy(), norm, 0, norm < config.tolerance)

    for it in range(1, config.max_iterations + 1):
        if norm < config.tolerance:
            return NewtonResult(x, norm, it - 1, True)

        # 기준점과 6개 섭동점을 한 번에 적분
        h = config.fd_perturbation * (1.0 + np.abs(x))
        X = np.vstack([x[None], x[None] + np.diag(h)])
        FX = _residuals(rod, X, config.steps)
        F = FX[0]
        J = (FX[1:] - F[None]).T / h[None, :]

        try:
            dx = np.linalg.solve(J, -F)
        except np.linalg.LinAlgError:
            dx = np.linalg.lstsq(J, -F, rcond=None)[0]

        merit = float(F @ F)
        step = 1.0
        accepted = None
        while step >= config.min_step:
            candidate = x + step * dx
            Fn = _try_residual(rod, candidate, config.steps)
            if Fn is not None and float(Fn @ Fn) <= (1.0 - 2.0 * config.armijo_c * step) * merit:
                accepted = (candidate, Fn)
                break
            step *= 0.5

        if accepted is None:
            logger.debug("line search stalled at iteration %d (residual %.3e)", it, norm)
            return NewtonResult(best.x, best.residual_norm, it, False)

        x, F = accepted
        norm = float(np.linalg.norm(F))
        logger.debug("newton %d: residual %.3e step %.3g", it, norm, step)
        if norm < best.residual_norm:
            best = NewtonResult(x.copy(), norm, it, False)

    converged = norm < config.tolerance
    return NewtonResult(x, norm, config.max_iterations, converged)


def _homotopy(design: DesignVector, config: SolverConfig):
    x = None
    previous = None
    total = 0
    result = None
    for lam in config.homotopy_stages:
        staged = TendonRod(design, config, tension_scale=lam)
        if x is None:
            guess = staged.straight_guess()
        else:
            # 하중은 장력에 대략 비례하므로 이전 해를 배율 조정해 시작점으로 쓴다
            guess = x * (lam / previous) if previous > 0 else x
        result = newton_shoot(staged, guess, config)
        total += result.iterations
        if not result.converged:
            raise NonConvergenceError(result.residual_norm, total)
        x, previous = result.x, lam
    return result, total


def _assemble(rod: TendonRod, x: np.ndarray, config: SolverConfig, **diagnostics) -> EquilibriumConfig:
    path = rk4(rod, clamped_states(x[None]), config.steps)[:, 0]
    r, R, n, m = unpack(path)
    grid = arclength_grid(rod.length, config.steps)
    rho = offsets_along(rod.offsets, rod.pitches, rod.angles, grid)
    tendons = r[None] + np.einsum("kij,tkj->tki", R, rho)
    return EquilibriumConfig(
        arclengths=grid,
        backbone=r.copy(),
        frames=R.copy(),
        tendon_curves=tendons,
        internal_force=n.copy(),
        internal_moment=m.copy(),
        base_loads=x.copy(),
        design=rod.design,
        steps=config.steps,
        **diagnostics,
    )


def solve_equilibrium(design: DesignVector, config: Optional[SolverConfig] = None) -> EquilibriumConfig:
    """설계 벡터의 정적 평형 형상. 직접 뉴턴이 실패하면 장력 호모토피로 재시도한다."""
    config = config or SolverConfig()
    rod = TendonRod(design, config)

    try:
        result = newton_shoot(rod, rod.straight_guess(), config)
        iterations = result.iterations
    except (IntegrationBlowupError, SolverDegeneracyError) as e:
        logger.debug("direct shooting failed (%s), falling back to homotopy", e)
        result, iterations = None, 0

    used_homotopy = result is None or not result.converged
    if used_homotopy:
        direct_best = result.residual_norm if result is not None else np.inf
        try:
            result, staged_iterations = _homotopy(design, config)
        except NonConvergenceError as e:
            raise NonConvergenceError(min(direct_best, e.best_residual), iterations + e.iterations) from e
        iterations += staged_iterations

    return _assemble(
        rod,
        result.x,
        config,
        residual_norm=result.residual_norm,
        iterations=iterations,
        used_homotopy=used_homotopy,
    )


def _solve_job(args):
    design, config = args
    return solve_equilibrium(design, config)


def solve_many(
    designs: Sequence[DesignVector],
    config: Optional[SolverConfig] = None,
    workers: Optional[int] = None,
    return_exceptions: bool = False,
) -> List:
    """여러 설계를 병렬로 푼다. 결과 순서는 입력 순서와 같다."""
    config = config or SolverConfig()
    return run_parallel(
        _solve_job,
        [(d, config) for d in designs],
        workers=workers,
        desc="solve",
        return_exceptions=return_exceptions,
    )

# dataset/generate.py
import logging
from dataclasses import dataclass
from typing import Callable, List, Optional

import numpy as np

from config.settings import Config
from dataset.sampling import TableSampler, sample_rng
from dataset.storage import Dataset
from errors import GenerationAbortedError, InputDomainError, TdcrError, VerificationError
from model import DesignVector, ParameterRanges, SolverConfig
from rodmodel.shooting import solve_equilibrium
from workers import run_parallel

logger = logging.getLogger(__name__)

# 샘플 하나가 같은 스트림에서 재추출을 시도하는 최대 횟수
MAX_ATTEMPTS_PER_SAMPLE = 20


@dataclass
class SampleResult:
    index: int
    design: Optional[np.ndarray]
    arclengths: Optional[np.ndarray]
    targets: Optional[np.ndarray]
    failures: int
    used_homotopy: bool = False
    last_error: str = ""


def _solve_sample(args) -> SampleResult:
    """샘플 j는 (seed, j)에만 의존한다. 실패하면 같은 스트림에서 다시 뽑는다."""
    seed, index, sampler, solver = args
    rng = sample_rng(seed, index)
    failures = 0
    last_error = ""
    for _ in range(MAX_ATTEMPTS_PER_SAMPLE):
        design = sampler(rng)
        try:
            eq = solve_equilibrium(design, solver)
        except TdcrError as e:
            failures += 1
            last_error = f"{type(e).__name__}: {e}"
            continue
        return SampleResult(index, design.to_array(), eq.arclengths, eq.targets(), failures, eq.used_homotopy)
    return SampleResult(index, None, None, None, failures, last_error=last_error)


def generate_dataset(
    n_samples: int,
    seed: int,
    ranges: Optional[ParameterRanges] = None,
    solver: Optional[SolverConfig] = None,
    workers: Optional[int] = None,
    sampler: Optional[Callable[[np.random.Generator], DesignVector]] = None,
    max_failure_rate: float = Config.MAX_FAILURE_RATE,
) -> Dataset:
    """설계를 뽑아 풀고 (design, equilibrium) 쌍을 모은다. 분할은 비어 있다."""
    if n_samples < 1:
        raise InputDomainError(f"dataset size must be at least 1, got {n_samples}")
    ranges = ranges or ParameterRanges()
    solver = solver or SolverConfig()
    sampler = sampler or TableSampler(ranges)

    jobs = [(seed, j, sampler, solver) for j in range(n_samples)]
    results: List[SampleResult] = run_parallel(_solve_sample, jobs, workers=workers, desc="gen-data")

    failures = sum(r.failures for r in results)
    attempts = n_samples + failures
    unresolved = [r for r in results if r.design is None]
    if unresolved or failures > max_failure_rate * attempts:
        detail = unresolved[0].last_error if unresolved else ""
        logger.error("generation aborted: %d failures in %d attempts %s", failures, attempts, detail)
        raise GenerationAbortedError(failures, attempts, max_failure_rate)

    homotopy = sum(r.used_homotopy for r in results)
    logger.info("solved %d designs (%d resampled, %d via homotopy)", n_samples, failures, homotopy)

    return Dataset(
        designs=np.stack([r.design for r in results]),
        arclengths=np.stack([r.arclengths for r in results]),
        targets=np.stack([r.targets for r in results]),
        seed=seed,
        ranges=ranges,
        failures=failures,
        manifest={
            "solver": solver.model_dump(mode="json"),
            "homotopy_fallbacks": int(homotopy),
            "attempts": int(attempts),
        },
    )


@dataclass
class VerificationReport:
    rows: List[int]
    max_target_deviation: float
    max_tip_deviation: float


def verify_dataset(
    ds: Dataset,
    rows: int = 5,
    seed: int = 0,
    solver: Optional[SolverConfig] = None,
    fine_steps: Optional[int] = None,
    tip_tolerance: float = 1e-4,
) -> VerificationReport:
    """임의의 행을 다시 풀어 저장된 텐던 곡선과 비교한다.

    fine_steps가 주어지면 미세 격자 해의 팁 텐던 위치와도 비교한다 (허용치는 L 배수).
    """
    solver = solver or SolverConfig()
    rows = min(rows, ds.n_samples)
    picked = sorted(sample_rng(seed, 0, 0xC4EC).choice(ds.n_samples, size=rows, replace=False).tolist())

    worst_target = 0.0
    worst_tip = 0.0
    for j in picked:
        design = ds.design(j)
        eq = solve_equilibrium(design, solver)
        deviation = float(np.max(np.abs(eq.targets() - ds.targets[j])))
        worst_target = max(worst_target, deviation)
        if deviation > 1e-9:
            raise VerificationError(f"row {j} does not reproduce its solved tendon curves", j, deviation)

        if fine_steps:
            fine = solve_equilibrium(design, solver.model_copy(update={"steps": fine_steps}))
            tip = float(np.max(np.linalg.norm(fine.tendon_curves[:, -1] - ds.targets[j, -1].reshape(-1, 3), axis=1)))
            worst_tip = max(worst_tip, tip)
            if tip > tip_tolerance * design.backbone_length:
                raise VerificationError(f"row {j} deviates from the fine-grid solution by {tip:.3e} m", j, tip)

    logger.info("verified rows %s (max deviation %.2e)", picked, worst_target)
    return VerificationReport(picked, worst_target, worst_tip)

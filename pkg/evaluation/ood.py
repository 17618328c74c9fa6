# evaluation/ood.py
import logging
from typing import List, Optional, Sequence, Tuple

import numpy as np

from config.settings import Config
from dataset.generate import generate_dataset
from dataset.sampling import OodSampler
from dataset.storage import Dataset
from errors import InputDomainError
from model import OodBin, ParameterRanges, SolverConfig

logger = logging.getLogger(__name__)


def bin_seed(seed: int, index: int) -> int:
    state = np.random.SeedSequence([int(seed), int(index)]).generate_state(2, dtype=np.uint32)
    return int(state[0]) << 32 | int(state[1])


def ood_generate(
    bins: Sequence[Tuple[float, float]],
    count_per_bin: int = 1000,
    seed: int = 0,
    ranges: Optional[ParameterRanges] = None,
    solver: Optional[SolverConfig] = None,
    workers: Optional[int] = None,
) -> List[Tuple[OodBin, Dataset]]:
    """구간마다 확장된 범위에서 설계를 뽑아 같은 솔버로 정답을 구한다.

    모든 샘플은 테스트 분할에 들어가고, 정규화는 학습 분포의 NormalizationSpec을 그대로 쓴다.
    """
    if not bins:
        raise InputDomainError("at least one OOD bin is required")
    ranges = ranges or ParameterRanges()

    out: List[Tuple[OodBin, Dataset]] = []
    for b, (lower, upper) in enumerate(bins):
        spec = OodBin(lower=lower, upper=upper, count=count_per_bin)
        ds = generate_dataset(
            count_per_bin,
            bin_seed(seed, b),
            ranges=ranges,
            solver=solver,
            workers=workers,
            sampler=OodSampler(ranges, lower, upper),
            max_failure_rate=Config.MAX_OOD_FAILURE_RATE,
        )
        ds = ds.with_split([], np.arange(ds.n_samples))
        ds.manifest["ood_bin"] = [float(lower), float(upper)]
        logger.info("OOD bin %s: %d samples, %d resampled", spec.label, ds.n_samples, ds.failures)
        out.append((spec, ds))
    return out

# dataset/sampling.py
import numpy as np

from model import DesignVector, ParameterRanges

# φ만 부호 있는 대칭 범위다
SIGNED_FIELDS = np.zeros(15, dtype=bool)
SIGNED_FIELDS[4:8] = True


def sample_rng(seed: int, index: int, *stream: int) -> np.random.Generator:
    """(seed, index) 로 키가 정해지는 카운터 기반 스트림. 작업자 수와 무관하게 같은 난수를 낸다."""
    return np.random.Generator(np.random.Philox(np.random.SeedSequence([int(seed), int(index), *stream])))


def sample_design(rng: np.random.Generator, ranges: ParameterRanges) -> DesignVector:
    """15개 스칼라를 각 범위에서 독립 균등 추출한다."""
    low, high = ranges.bounds()
    return DesignVector.from_array(rng.uniform(low, high))


class TableSampler:
    """학습 분포 샘플러. generate_dataset에 넘기는 피클 가능한 호출 객체."""

    def __init__(self, ranges: ParameterRanges):
        self.ranges = ranges

    def __call__(self, rng: np.random.Generator) -> DesignVector:
        return sample_design(rng, self.ranges)


class OodSampler:
    """범위 끝을 [lower, upper]% 만큼 넓혀 뽑는 분포 밖 샘플러.

    샘플마다 파라미터별 확장 비율 p를 하나씩 뽑고, 각 파라미터를 확장 구간
    (hi, hi + p·w]에서 균등 추출한다. φ는 [lo − p·w, lo) ∪ (hi, hi + p·w] 중
    한쪽을 반반 확률로 고른다. 그래서 폭이 있는 파라미터는 모두 원래 범위 밖에 놓인다.
    upper ≤ 0 인 구간은 학습 분포 기준 구간이므로 원래 범위에서 그대로 뽑는다.
    """

    def __init__(self, ranges: ParameterRanges, lower_pct: float, upper_pct: float):
        self.ranges = ranges
        self.lower_pct = lower_pct
        self.upper_pct = upper_pct

    @property
    def in_distribution(self) -> bool:
        return self.upper_pct <= 0.0

    def __call__(self, rng: np.random.Generator) -> DesignVector:
        if self.in_distribution:
            return sample_design(rng, self.ranges)

        low, high = self.ranges.bounds()
        width = high - low
        pct = rng.uniform(max(self.lower_pct, 0.0), self.upper_pct, size=low.shape) / 100.0
        extension = pct * width

        # 1 − U ∈ (0, 1] 이므로 범위 끝 자체는 나오지 않는다
        step = extension * (1.0 - rng.random(size=low.shape))
        below = SIGNED_FIELDS & (rng.random(size=low.shape) < 0.5)
        x = np.where(below, low - step, high + step)
        return DesignVector.from_array(x)

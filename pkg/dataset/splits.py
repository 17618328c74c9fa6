# dataset/splits.py
from typing import Iterator, Sequence, Union

import numpy as np

from dataset.storage import Dataset
from errors import InputDomainError

SPLIT_STREAM = 0x5D17


def _rng(seed) -> np.random.Generator:
    entropy = [int(s) for s in np.atleast_1d(seed)]
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(entropy)))


def split_dataset(ds: Dataset, test_fraction: float = 0.2, seed: int = 0) -> Dataset:
    """균등 무작위 train/test 분할. |test| = round(f·N)."""
    if not 0.0 < test_fraction < 1.0:
        raise InputDomainError(f"test fraction must lie in (0, 1), got {test_fraction}")
    N = ds.n_samples
    n_test = int(np.floor(test_fraction * N + 0.5))
    perm = _rng([seed, SPLIT_STREAM]).permutation(N)
    return ds.with_split(np.sort(perm[n_test:]), np.sort(perm[:n_test]))


def nested_subset(train_idx: np.ndarray, n: int, seed: int) -> np.ndarray:
    """고정 순열의 앞 n개. 큰 n의 부분집합이 작은 n의 부분집합을 포함한다."""
    if n <= 0:
        raise InputDomainError(f"subset size must be positive, got {n}")
    if n > len(train_idx):
        raise InputDomainError(f"requested {n} training samples but only {len(train_idx)} are available")
    order = _rng([seed, SPLIT_STREAM, 1]).permutation(len(train_idx))
    return np.asarray(train_idx)[order[:n]]


def batches(
    indices: Union[int, Sequence[int], Dataset], batch_size: int, epoch_seed
) -> Iterator[np.ndarray]:
    """에폭마다 섞인 인덱스 블록. 마지막 블록은 짧을 수 있다."""
    if batch_size < 1:
        raise InputDomainError(f"batch size must be at least 1, got {batch_size}")
    if isinstance(indices, Dataset):
        pool = np.arange(indices.n_samples)
    elif isinstance(indices, (int, np.integer)):
        pool = np.arange(int(indices))
    else:
        pool = np.asarray(indices, dtype=np.int64)

    order = pool[_rng(epoch_seed).permutation(len(pool))]
    for start in range(0, len(order), batch_size):
        yield order[start : start + batch_size]

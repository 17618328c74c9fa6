# dataset/normalization.py
from typing import Union

import numpy as np

from model import DesignVector, NormalizationSpec

DEFAULT_SPEC = NormalizationSpec()


def _as_array(design: Union[DesignVector, np.ndarray]) -> np.ndarray:
    if isinstance(design, DesignVector):
        return design.to_array()
    return np.asarray(design, dtype=np.float64)


def normalize_design(design: Union[DesignVector, np.ndarray], spec: NormalizationSpec = DEFAULT_SPEC) -> np.ndarray:
    """고정 배율을 곱해 15개 좌표를 비슷한 크기로 맞춘다. (..., 15) 배열도 받는다."""
    return _as_array(design) * np.asarray(spec.scales)


def denormalize_design(values: np.ndarray, spec: NormalizationSpec = DEFAULT_SPEC) -> np.ndarray:
    return np.asarray(values, dtype=np.float64) / np.asarray(spec.scales)

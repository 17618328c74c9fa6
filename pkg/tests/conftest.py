import numpy as np
import pytest

from dataset.generate import generate_dataset
from dataset.splits import split_dataset
from model import DesignVector, ModelDims, ParameterRanges, SolverConfig


def make_design(tensions=(0.0, 0.0, 0.0, 0.0), offsets=0.01, pitches=0.0, radius=0.001, length=0.2, modulus=30e9):
    as4 = lambda x: tuple(float(v) for v in np.broadcast_to(np.asarray(x, dtype=float), (4,)))
    return DesignVector(
        tendon_offsets=as4(offsets),
        tendon_pitches=as4(pitches),
        tendon_tensions=as4(tensions),
        backbone_radius=radius,
        backbone_length=length,
        youngs_modulus=modulus,
    )


@pytest.fixture
def straight_design():
    return make_design()


@pytest.fixture
def single_tendon_design():
    return make_design(tensions=(5.0, 0.0, 0.0, 0.0))


@pytest.fixture
def helical_design():
    return make_design(tensions=(2.0, 0.5, 0.0, 1.0), pitches=(5.0, -3.0, 8.0, 0.0), offsets=(0.008, 0.01, 0.006, 0.009))


@pytest.fixture
def solver():
    return SolverConfig()


@pytest.fixture
def tiny_dims():
    """그래디언트 검사용 축소 폭."""
    return ModelDims(branch_hidden=8, trunk_hidden=8, mlp_layers=3, basis=4, fno_width=8, fno_modes=3, fno_layers=2)


# 작은 범위로 뽑은 빠른 데이터셋 (장력과 길이를 줄여 솔버가 금방 수렴한다)
SMALL_RANGES = ParameterRanges(tension=(0.0, 1.0), pitch=(-5.0, 5.0))


@pytest.fixture(scope="session")
def tiny_dataset():
    ds = generate_dataset(16, seed=3, ranges=SMALL_RANGES, workers=1)
    return split_dataset(ds, 0.25, seed=3)


@pytest.fixture(autouse=True)
def isolated_cache(tmp_path, monkeypatch):
    monkeypatch.setenv("TDCROP_CACHE", str(tmp_path / "cache"))

# model.py
from pathlib import Path
from typing import Dict, List, Literal, Optional, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator, model_validator

from config.settings import Config
from errors import InputDomainError

ArchTag = Literal["deeponet", "deeponet_pose", "fno", "fno_pose"]
ARCHITECTURES: Tuple[str, ...] = ("deeponet", "deeponet_pose", "fno", "fno_pose")

# 15차원 설계 벡터의 고정 순서: ρ1..4, φ1..4, τ1..4, r, L, E
DESIGN_FIELDS: Tuple[str, ...] = (
    *(f"rho{i}" for i in range(1, 5)),
    *(f"phi{i}" for i in range(1, 5)),
    *(f"tau{i}" for i in range(1, 5)),
    "r",
    "L",
    "E",
)


def is_pose(architecture: str) -> bool:
    return architecture.endswith("_pose")


def output_channels(architecture: str) -> int:
    return 9 if is_pose(architecture) else 12


class DesignVector(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid")

    tendon_offsets: Tuple[float, float, float, float]
    tendon_pitches: Tuple[float, float, float, float]
    tendon_tensions: Tuple[float, float, float, float]
    backbone_radius: float
    backbone_length: float
    youngs_modulus: float

    @field_validator("tendon_offsets")
    @classmethod
    def _offsets_positive(cls, v):
        if any(x <= 0 for x in v):
            raise ValueError("tendon offsets must be positive")
        return v

    @field_validator("tendon_tensions")
    @classmethod
    def _tensions_nonnegative(cls, v):
        if any(x < 0 for x in v):
            raise ValueError("tendon tensions must be non-negative")
        return v

    @field_validator("backbone_radius", "backbone_length", "youngs_modulus")
    @classmethod
    def _strictly_positive(cls, v):
        if v <= 0:
            raise ValueError("must be positive")
        return v

    def to_array(self) -> np.ndarray:
        return np.array(
            [
                *self.tendon_offsets,
                *self.tendon_pitches,
                *self.tendon_tensions,
                self.backbone_radius,
                self.backbone_length,
                self.youngs_modulus,
            ],
            dtype=np.float64,
        )

    @classmethod
    def from_array(cls, values) -> "DesignVector":
        v = [float(x) for x in np.asarray(values, dtype=np.float64).reshape(-1)]
        if len(v) != Config.DESIGN_DIM:
            raise InputDomainError(f"design vector needs {Config.DESIGN_DIM} values, got {len(v)}")
        try:
            return cls(
                tendon_offsets=tuple(v[0:4]),
                tendon_pitches=tuple(v[4:8]),
                tendon_tensions=tuple(v[8:12]),
                backbone_radius=v[12],
                backbone_length=v[13],
                youngs_modulus=v[14],
            )
        except ValidationError as e:
            raise InputDomainError(str(e)) from e

    def with_tensions(self, tensions) -> "DesignVector":
        return self.model_copy(update={"tendon_tensions": tuple(float(t) for t in tensions)})


class ParameterRanges(BaseModel):
    """Table 1의 샘플링 범위. 기본값은 표와 정확히 같다."""

    model_config = ConfigDict(extra="forbid")

    tension: Tuple[float, float] = (0.0, 5.0)
    length: Tuple[float, float] = (0.1, 0.35)
    pitch: Tuple[float, float] = (-20.0, 20.0)
    offset: Tuple[float, float] = (0.005, 0.01)
    modulus: Tuple[float, float] = (15.5e9, 45.5e9)
    radius: Tuple[float, float] = (0.0005, 0.0015)

    @field_validator("tension", "length", "pitch", "offset", "modulus", "radius")
    @classmethod
    def _ordered(cls, v):
        # 퇴화 구간(low == high)은 상수 파라미터로 허용
        if v[0] > v[1]:
            raise ValueError("low must not exceed high")
        return v

    def bounds(self) -> Tuple[np.ndarray, np.ndarray]:
        """설계 벡터 순서의 (low, high) 배열."""
        per_field = (
            [self.offset] * 4 + [self.pitch] * 4 + [self.tension] * 4 + [self.radius, self.length, self.modulus]
        )
        low = np.array([b[0] for b in per_field], dtype=np.float64)
        high = np.array([b[1] for b in per_field], dtype=np.float64)
        return low, high


DEFAULT_SCALES: Tuple[float, ...] = (100.0,) * 4 + (0.1,) * 4 + (1.0,) * 4 + (1000.0, 10.0, 1e-10)


class NormalizationSpec(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid")

    scales: Tuple[float, ...] = DEFAULT_SCALES
    arclength_passthrough: bool = True

    @field_validator("scales")
    @classmethod
    def _invertible(cls, v):
        if len(v) != Config.DESIGN_DIM:
            raise ValueError(f"expected {Config.DESIGN_DIM} scales")
        if any(s == 0 for s in v):
            raise ValueError("scales must be nonzero")
        return v


class SolverConfig(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid")

    steps: int = Field(default=Config.PRODUCTION_STEPS, ge=1)
    poisson: float = Field(default=Config.POISSON_RATIO, ge=0.0, lt=0.5)
    tolerance: float = Field(default=Config.SHOOTING_TOL, gt=0.0)
    max_iterations: int = Field(default=Config.NEWTON_MAX_ITER, ge=1)
    fd_perturbation: float = Field(default=Config.FD_PERTURBATION, gt=0.0)
    armijo_c: float = Field(default=Config.ARMIJO_C, gt=0.0, lt=1.0)
    min_step: float = Field(default=Config.ARMIJO_MIN_STEP, gt=0.0)
    homotopy_stages: Tuple[float, ...] = Config.HOMOTOPY_STAGES
    # 모든 기저 각도 ψ_i에 더해지는 라우팅 위상 (회전 등변성 검증용)
    routing_phase: float = 0.0


class LrSchedule(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid")

    initial: float = Field(default=1e-4, gt=0.0)
    warmup_fraction: float = Field(default=0.3, gt=0.0, lt=1.0)
    peak: float = Field(default=3e-3, gt=0.0)
    end: float = Field(default=5e-6, gt=0.0)
    cycles: int = Field(default=4, ge=1)
    gamma: float = Field(default=0.7, gt=0.0)
    horizon: int = Field(default=100_000, ge=1)


class ModelDims(BaseModel):
    """아키텍처 폭/깊이. 기본값은 기준 설정, 테스트에서는 축소 폭으로 덮어쓴다."""

    model_config = ConfigDict(frozen=True, extra="forbid")

    branch_hidden: int = Field(default=64, ge=1)
    trunk_hidden: int = Field(default=128, ge=1)
    mlp_layers: int = Field(default=5, ge=1)
    basis: int = Field(default=100, ge=1)
    fno_width: int = Field(default=128, ge=1)
    fno_modes: int = Field(default=5, ge=1)
    fno_layers: int = Field(default=5, ge=1)


class TrainConfig(BaseModel):
    model_config = ConfigDict(extra="forbid")

    architecture: ArchTag = "deeponet"
    dataset: Optional[Path] = None
    seed: int = 0
    batch_size: int = Field(default=256, ge=1)
    max_epochs: int = Field(default=20_000, ge=1)
    stop_window: Optional[int] = Field(default=None, ge=1)
    stop_threshold: float = Field(default=1e-3, gt=0.0)
    schedule: LrSchedule = LrSchedule()
    dropout: float = Field(default=0.0, ge=0.0, lt=1.0)
    output_dir: Optional[Path] = None
    checkpoint_every: int = Field(default=500, ge=1)
    torch_threads: int = Field(default=1, ge=1)
    dims: ModelDims = ModelDims()

    def window(self) -> int:
        if self.stop_window is not None:
            return self.stop_window
        return 100 if self.architecture.startswith("fno") else 200


class GenDataConfig(BaseModel):
    model_config = ConfigDict(extra="forbid")

    n_samples: int = Field(default=1000, ge=1)
    seed: int = 0
    test_fraction: float = Field(default=0.2, gt=0.0, lt=1.0)
    ranges: ParameterRanges = ParameterRanges()
    solver: SolverConfig = SolverConfig()
    output: Path = Path("dataset.tdcr")
    workers: Optional[int] = Field(default=None, ge=1)
    verify_rows: int = Field(default=5, ge=0)


class EvalConfig(BaseModel):
    model_config = ConfigDict(extra="forbid")

    dataset: Path
    checkpoints: List[Path] = Field(min_length=1)
    architecture: Optional[ArchTag] = None


class StudyConfig(BaseModel):
    model_config = ConfigDict(extra="forbid")

    dataset: Path
    architectures: List[ArchTag] = list(ARCHITECTURES)
    seeds: List[int] = [0, 1, 2]
    n_list: List[int] = [100, 500, 2000, 8000]
    q_list: List[float] = [0.0, 0.1, 0.2, 0.3]
    n_train: int = Field(default=2000, ge=1)
    bins: List[Tuple[float, float]] = [(-5.0, 0.0), (0.0, 5.0), (5.0, 10.0), (10.0, 15.0), (15.0, 20.0)]
    count_per_bin: int = Field(default=1000, ge=1)
    ood_seed: int = 1
    train: TrainConfig = TrainConfig()
    solver: SolverConfig = SolverConfig()
    workers: Optional[int] = Field(default=None, ge=1)

    @field_validator("n_list")
    @classmethod
    def _positive_sizes(cls, v):
        if any(n <= 0 for n in v):
            raise ValueError("training sizes must be positive")
        return v

    @field_validator("q_list")
    @classmethod
    def _dropout_range(cls, v):
        if any(q < 0 or q > 0.5 for q in v):
            raise ValueError("dropout rates must lie in [0, 0.5]")
        return v


class BenchConfig(BaseModel):
    model_config = ConfigDict(extra="forbid")

    architectures: List[ArchTag] = list(ARCHITECTURES)
    workloads: List[int] = [1, 1000]
    train_sizes: List[int] = [1, 1000]
    include_large: bool = False
    repetitions: int = Field(default=5, ge=5)
    warmup: int = Field(default=2, ge=0)
    n_nodes: int = Field(default=Config.N_NODES, ge=2)
    seed: int = 0
    dims: ModelDims = ModelDims()
    # None이면 torch 기본 스레드 수
    torch_threads: Optional[int] = Field(default=None, ge=1)


class ModelScore(BaseModel):
    architecture: str
    per_seed_errors: List[float]
    mean_error: float
    accuracy: float
    seed_count: int
    node_profile: List[float] = []

    @classmethod
    def from_errors(cls, architecture: str, errors: List[float], node_profile=None) -> "ModelScore":
        mean = float(np.mean(errors))
        return cls(
            architecture=architecture,
            per_seed_errors=[float(e) for e in errors],
            mean_error=mean,
            accuracy=(1.0 - mean) * 100.0,
            seed_count=len(errors),
            node_profile=[float(x) for x in (node_profile if node_profile is not None else [])],
        )


class EvalReport(BaseModel):
    models: Dict[str, ModelScore] = {}
    dataset: Optional[str] = None
    n_test: int = 0


class OodBin(BaseModel):
    lower: float
    upper: float
    count: int = Field(default=1000, ge=1)
    errors: Dict[str, float] = {}

    @model_validator(mode="after")
    def _width(self):
        if abs((self.upper - self.lower) - 5.0) > 1e-12:
            raise ValueError("OOD bins are 5 percentage points wide")
        return self

    @property
    def label(self) -> str:
        return f"{self.lower:g}..{self.upper:g}%"

    @property
    def in_distribution(self) -> bool:
        return self.upper <= 0.0


class TimingRow(BaseModel):
    model: str
    workload: str
    seconds: float = Field(gt=0.0)
    repetitions: int
    hardware: str


class StudyRow(BaseModel):
    study: str
    model: str
    seed: int
    param: str
    value: float
    error: Optional[float] = None
    seconds: float = 0.0
    failure: Optional[str] = None

# dataset/storage.py
import logging
import os
import struct
import zlib
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Any, Dict, Sequence

import numpy as np
import orjson
from pydantic import ValidationError

from config.settings import Config
from dataset.normalization import normalize_design
from errors import ChecksumError, FormatError
from model import DesignVector, NormalizationSpec, ParameterRanges

logger = logging.getLogger(__name__)

DATASET_MAGIC = b"TDCRDS1\x00"
DATASET_VERSION = 1


def atomic_write_bytes(path: Path, data: bytes) -> Path:
    """<name>.tmp에 쓴 뒤 os.replace로 교체한다."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    tmp = path.with_name(path.name + ".tmp")
    with open(tmp, "wb") as f:
        f.write(data)
        f.flush()
        os.fsync(f.fileno())
    os.replace(tmp, path)
    return path


def f64_bytes(*arrays: np.ndarray) -> bytes:
    return b"".join(np.ascontiguousarray(a, dtype="<f8").tobytes() for a in arrays)


@dataclass
class Dataset:
    designs: np.ndarray  # (N, 15) 원시값
    arclengths: np.ndarray  # (N, n)
    targets: np.ndarray  # (N, n, 12) 미터 단위 텐던 위치
    seed: int = 0
    ranges: ParameterRanges = field(default_factory=ParameterRanges)
    normalization: NormalizationSpec = field(default_factory=NormalizationSpec)
    train_idx: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=np.int64))
    test_idx: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=np.int64))
    failures: int = 0
    manifest: Dict[str, Any] = field(default_factory=dict)

    @property
    def n_samples(self) -> int:
        return int(self.designs.shape[0])

    @property
    def n_nodes(self) -> int:
        return int(self.arclengths.shape[1])

    @property
    def normalized_designs(self) -> np.ndarray:
        return normalize_design(self.designs, self.normalization)

    @property
    def has_split(self) -> bool:
        return len(self.train_idx) + len(self.test_idx) == self.n_samples and self.n_samples > 0

    def design(self, j: int) -> DesignVector:
        return DesignVector.from_array(self.designs[j])

    def with_split(self, train_idx: Sequence[int], test_idx: Sequence[int]) -> "Dataset":
        return replace(
            self,
            train_idx=np.asarray(train_idx, dtype=np.int64),
            test_idx=np.asarray(test_idx, dtype=np.int64),
        )

    def header(self) -> Dict[str, Any]:
        return {
            "version": DATASET_VERSION,
            "n_samples": self.n_samples,
            "n_nodes": self.n_nodes,
            "n_tendons": Config.N_TENDONS,
            "design_dim": Config.DESIGN_DIM,
            "seed": int(self.seed),
            "failures": int(self.failures),
            "ranges": self.ranges.model_dump(mode="json"),
            "normalization": self.normalization.model_dump(mode="json"),
            "split": {"train": [int(i) for i in self.train_idx], "test": [int(i) for i in self.test_idx]},
            "manifest": self.manifest,
        }

    def equals(self, other: "Dataset") -> bool:
        return (
            self.header() == other.header()
            and np.array_equal(self.designs, other.designs)
            and np.array_equal(self.arclengths, other.arclengths)
            and np.array_equal(self.targets, other.targets)
        )


def save_dataset(ds: Dataset, path: Path) -> Path:
    header_bytes = orjson.dumps(ds.header())
    payload = f64_bytes(ds.designs, ds.arclengths, ds.targets)

    data = b"".join(
        [
            DATASET_MAGIC,
            struct.pack("<Q", len(header_bytes)),
            header_bytes,
            payload,
            struct.pack("<I", zlib.crc32(payload) & 0xFFFFFFFF),
        ]
    )
    atomic_write_bytes(path, data)
    logger.info("dataset with %d samples written to %s", ds.n_samples, path)
    return Path(path)


def read_framed(data: bytes, magic: bytes, what: str):
    """magic | u64 헤더 길이 | JSON 헤더 | 나머지 본문. 헤더와 본문을 돌려준다."""
    if len(data) < len(magic) + 8 or data[: len(magic)] != magic:
        raise FormatError(f"not a {what} file (bad magic)")
    offset = len(magic)
    (header_len,) = struct.unpack_from("<Q", data, offset)
    offset += 8
    if offset + header_len > len(data):
        raise FormatError(f"truncated {what} header")
    try:
        header = orjson.loads(data[offset : offset + header_len])
    except orjson.JSONDecodeError as e:
        raise FormatError(f"corrupt {what} header: {e}") from e
    return header, data[offset + header_len :]


def split_payload(body: bytes, expected: int, what: str) -> bytes:
    """본문 = payload + u32 CRC. 길이와 CRC를 확인한 payload를 돌려준다."""
    if len(body) != expected + 4:
        raise FormatError(f"truncated or oversized {what}: expected {expected + 4} payload bytes, got {len(body)}")
    payload = body[:expected]
    (stored,) = struct.unpack("<I", body[expected:])
    if zlib.crc32(payload) & 0xFFFFFFFF != stored:
        raise ChecksumError(f"{what} checksum mismatch")
    return payload


def load_dataset(path: Path) -> Dataset:
    data = Path(path).read_bytes()
    header, body = read_framed(data, DATASET_MAGIC, "dataset")
    if header.get("version") != DATASET_VERSION:
        raise FormatError(f"unsupported dataset version {header.get('version')}")

    try:
        N, n = int(header["n_samples"]), int(header["n_nodes"])
        dim = int(header["design_dim"])
        channels = 3 * int(header["n_tendons"])
    except (KeyError, TypeError, ValueError) as e:
        raise FormatError(f"incomplete dataset header: {e}") from e

    sizes = [N * dim, N * n, N * n * channels]
    payload = split_payload(body, 8 * sum(sizes), "dataset")
    flat = np.frombuffer(payload, dtype="<f8").astype(np.float64)
    designs = flat[: sizes[0]].reshape(N, dim)
    arclengths = flat[sizes[0] : sizes[0] + sizes[1]].reshape(N, n)
    targets = flat[sizes[0] + sizes[1] :].reshape(N, n, channels)

    try:
        ranges = ParameterRanges.model_validate(header["ranges"])
        normalization = NormalizationSpec.model_validate(header["normalization"])
    except (KeyError, ValidationError) as e:
        raise FormatError(f"invalid dataset metadata: {e}") from e

    split = header.get("split", {})
    return Dataset(
        designs=designs,
        arclengths=arclengths,
        targets=targets,
        seed=int(header.get("seed", 0)),
        ranges=ranges,
        normalization=normalization,
        train_idx=np.asarray(split.get("train", []), dtype=np.int64),
        test_idx=np.asarray(split.get("test", []), dtype=np.int64),
        failures=int(header.get("failures", 0)),
        manifest=header.get("manifest", {}),
    )

# training/checkpoint.py
import logging
import struct
import zlib
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, List, Optional

import numpy as np
import orjson
import torch
from pydantic import ValidationError

from dataset.storage import atomic_write_bytes, f64_bytes, read_framed, split_payload
from errors import ArchitectureMismatchError, FormatError
from model import ModelDims, NormalizationSpec
from neuralops.base import OperatorModel
from neuralops.factory import build_model
from training.optimizer import AdamState

logger = logging.getLogger(__name__)

CHECKPOINT_MAGIC = b"TDCRCKPT"
CHECKPOINT_VERSION = 1


@dataclass
class Checkpoint:
    model: OperatorModel
    adam: Optional[AdamState]
    epoch: int
    history: List[float] = field(default_factory=list)
    normalization: NormalizationSpec = field(default_factory=NormalizationSpec)
    meta: Dict[str, Any] = field(default_factory=dict)

    @property
    def architecture(self) -> str:
        return self.model.architecture


def save_checkpoint(
    path: Path,
    model: OperatorModel,
    adam: Optional[AdamState] = None,
    epoch: int = 0,
    history: Optional[List[float]] = None,
    normalization: Optional[NormalizationSpec] = None,
    meta: Optional[Dict[str, Any]] = None,
) -> Path:
    """파라미터 블록(선언 순서) 뒤에 옵티마이저 m, v 블록을 같은 순서로 붙인다."""
    named = [(name, p.detach()) for name, p in model.named_parameters()]
    header = {
        "version": CHECKPOINT_VERSION,
        "architecture": model.architecture,
        "dims": model.dims.model_dump(),
        "seed": int(model.seed),
        "epoch": int(epoch),
        "has_optimizer": adam is not None,
        "blocks": [{"name": name, "shape": list(p.shape)} for name, p in named],
        "history": [float(x) for x in (history or [])],
        "normalization": (normalization or NormalizationSpec()).model_dump(mode="json"),
        "meta": meta or {},
    }
    arrays = [p.numpy() for _, p in named]
    if adam is not None:
        header["adam"] = {"t": adam.t, "beta1": adam.beta1, "beta2": adam.beta2, "eps": adam.eps}
        arrays += [adam.m[name].numpy() for name, _ in named]
        arrays += [adam.v[name].numpy() for name, _ in named]

    header_bytes = orjson.dumps(header)
    payload = f64_bytes(*arrays)
    data = b"".join(
        [
            CHECKPOINT_MAGIC,
            struct.pack("<Q", len(header_bytes)),
            header_bytes,
            payload,
            struct.pack("<I", zlib.crc32(payload) & 0xFFFFFFFF),
        ]
    )
    atomic_write_bytes(path, data)
    logger.debug("checkpoint for epoch %d written to %s", epoch, path)
    return Path(path)


def read_checkpoint_header(path: Path) -> Dict[str, Any]:
    header, _ = read_framed(Path(path).read_bytes(), CHECKPOINT_MAGIC, "checkpoint")
    return header


def load_checkpoint(path: Path, architecture: Optional[str] = None) -> Checkpoint:
    header, body = read_framed(Path(path).read_bytes(), CHECKPOINT_MAGIC, "checkpoint")
    if header.get("version") != CHECKPOINT_VERSION:
        raise FormatError(f"unsupported checkpoint version {header.get('version')}")
    if architecture is not None and header.get("architecture") != architecture:
        raise ArchitectureMismatchError(
            f"checkpoint holds a '{header.get('architecture')}' model, expected '{architecture}'"
        )

    try:
        dims = ModelDims.model_validate(header["dims"])
        model = build_model(header["architecture"], dims, int(header["seed"]))
        normalization = NormalizationSpec.model_validate(header["normalization"])
    except (KeyError, ValidationError, ValueError) as e:
        raise FormatError(f"invalid checkpoint header: {e}") from e

    named = list(model.named_parameters())
    blocks = header.get("blocks", [])
    if [b["name"] for b in blocks] != [n for n, _ in named] or any(
        list(b["shape"]) != list(p.shape) for b, (_, p) in zip(blocks, named)
    ):
        raise ArchitectureMismatchError("checkpoint parameter blocks do not match the architecture layout")

    sizes = [p.numel() for _, p in named]
    has_optimizer = bool(header.get("has_optimizer"))
    total = sum(sizes) * (3 if has_optimizer else 1)
    payload = split_payload(body, 8 * total, "checkpoint")
    flat = np.frombuffer(payload, dtype="<f8").astype(np.float64)

    def take(offset: int):
        tree = {}
        for (name, p), size in zip(named, sizes):
            tree[name] = torch.from_numpy(flat[offset : offset + size].reshape(tuple(p.shape)).copy())
            offset += size
        return tree, offset

    params, offset = take(0)
    with torch.no_grad():
        for name, p in named:
            p.copy_(params[name])

    adam = None
    if has_optimizer:
        m, offset = take(offset)
        v, offset = take(offset)
        hyper = header["adam"]
        adam = AdamState(m, v, int(hyper["t"]), float(hyper["beta1"]), float(hyper["beta2"]), float(hyper["eps"]))

    return Checkpoint(
        model=model,
        adam=adam,
        epoch=int(header["epoch"]),
        history=[float(x) for x in header.get("history", [])],
        normalization=normalization,
        meta=header.get("meta", {}),
    )

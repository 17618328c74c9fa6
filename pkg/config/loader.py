# config/loader.py
import hashlib
import logging
import platform
from datetime import datetime, timedelta, timezone
from pathlib import Path
from typing import Any, Dict, Iterable, Optional, Type, TypeVar

import orjson
from pydantic import BaseModel, ValidationError

from errors import ConfigError

logger = logging.getLogger(__name__)

KST = timezone(timedelta(hours=9))

M = TypeVar("M", bound=BaseModel)


def _pointer(loc: Iterable[Any]) -> str:
    """pydantic loc 튜플을 JSON pointer로 변환 (RFC 6901 이스케이프 포함)."""
    parts = [str(p).replace("~", "~0").replace("/", "~1") for p in loc]
    return "/" + "/".join(parts)


def _merge(base: Dict[str, Any], overrides: Dict[str, Any]) -> Dict[str, Any]:
    merged = dict(base)
    for key, value in overrides.items():
        if value is None:
            continue
        if "." in key:
            head, rest = key.split(".", 1)
            child = merged.get(head)
            merged[head] = _merge(child if isinstance(child, dict) else {}, {rest: value})
        elif isinstance(value, dict) and isinstance(merged.get(key), dict):
            merged[key] = _merge(merged[key], value)
        else:
            merged[key] = value
    return merged


def read_json(path: Path) -> Any:
    try:
        return orjson.loads(Path(path).read_bytes())
    except FileNotFoundError as e:
        raise ConfigError(f"config file not found: {path}") from e
    except orjson.JSONDecodeError as e:
        raise ConfigError(f"invalid JSON in {path}: {e}") from e


def load_config(model_cls: Type[M], path: Optional[Path] = None, overrides: Optional[Dict[str, Any]] = None) -> M:
    """JSON 파일을 읽고 CLI 플래그로 덮어쓴 뒤 검증한다.

    overrides의 None 값은 무시되므로 지정하지 않은 플래그는 파일 값을 유지한다.
    점(.)이 들어간 키는 중첩 필드 경로로 해석한다 (예: "schedule.peak").
    """
    raw: Dict[str, Any] = {}
    if path is not None:
        data = read_json(path)
        if not isinstance(data, dict):
            raise ConfigError("config document must be a JSON object", ["/"])
        raw = data
    raw = _merge(raw, overrides or {})

    try:
        return model_cls.model_validate(raw)
    except ValidationError as e:
        pointers = [_pointer(err["loc"]) for err in e.errors()]
        details = "; ".join(f"{_pointer(err['loc'])}: {err['msg']}" for err in e.errors())
        raise ConfigError(f"invalid {model_cls.__name__}: {details}", pointers) from e


def dump_json(obj: Any) -> bytes:
    if isinstance(obj, BaseModel):
        obj = obj.model_dump(mode="json")
    return orjson.dumps(obj, option=orjson.OPT_INDENT_2 | orjson.OPT_SERIALIZE_NUMPY)


def write_json(path: Path, obj: Any) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_bytes(dump_json(obj))
    return path


def config_hash(cfg: BaseModel) -> str:
    canonical = orjson.dumps(cfg.model_dump(mode="json"), option=orjson.OPT_SORT_KEYS)
    return hashlib.sha256(canonical).hexdigest()


def _versions() -> Dict[str, str]:
    import numpy
    import pydantic

    versions = {
        "python": platform.python_version(),
        "numpy": numpy.__version__,
        "pydantic": pydantic.__version__,
    }
    try:
        import torch

        versions["torch"] = torch.__version__
    except ImportError:
        pass
    return versions


def write_provenance(out_dir: Path, command: str, cfg: BaseModel, seeds: Iterable[int] = ()) -> Path:
    """effective_config.json과 manifest.json을 출력 디렉토리에 남긴다."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    write_json(out_dir / "effective_config.json", cfg)
    manifest = {
        "command": command,
        "config_hash": config_hash(cfg),
        "seeds": [int(s) for s in seeds],
        "versions": _versions(),
        "created_at": datetime.now(KST).isoformat(),
        "host": platform.node(),
    }
    path = write_json(out_dir / "manifest.json", manifest)
    logger.debug("provenance written to %s", out_dir)
    return path

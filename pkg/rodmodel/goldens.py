# rodmodel/goldens.py
from pathlib import Path
from typing import List, NamedTuple

import numpy as np

from errors import FormatError

GOLDEN_HEADER = "# tdcrop golden tips v1"
GOLDEN_COLUMNS = "# steps rho1 rho2 rho3 rho4 phi1 phi2 phi3 phi4 tau1 tau2 tau3 tau4 r L E tip_x tip_y tip_z"


class Golden(NamedTuple):
    steps: int
    design: np.ndarray  # (15,)
    tip: np.ndarray  # (3,)


def _fmt(x: float) -> str:
    return f"{float(x):.17g}"


def append_golden(path: Path, design: np.ndarray, tip: np.ndarray, steps: int) -> None:
    """미세 격자 팁 위치를 고정밀 텍스트 픽스처에 한 줄 추가한다."""
    path = Path(path)
    if path.exists():
        read_goldens(path)
    else:
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(f"{GOLDEN_HEADER}\n{GOLDEN_COLUMNS}\n")

    values = [str(int(steps))] + [_fmt(v) for v in np.asarray(design).reshape(-1)] + [_fmt(v) for v in tip]
    with path.open("a") as f:
        f.write(" ".join(values) + "\n")


def read_goldens(path: Path) -> List[Golden]:
    lines = Path(path).read_text().splitlines()
    if not lines or lines[0].strip() != GOLDEN_HEADER:
        raise FormatError(f"{path}: not a golden fixture file (expected '{GOLDEN_HEADER}')")

    goldens = []
    for lineno, line in enumerate(lines[1:], start=2):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        parts = line.split()
        if len(parts) != 19:
            raise FormatError(f"{path}:{lineno}: expected 19 fields, got {len(parts)}")
        try:
            values = [float(p) for p in parts[1:]]
            goldens.append(Golden(int(parts[0]), np.array(values[:15]), np.array(values[15:])))
        except ValueError as e:
            raise FormatError(f"{path}:{lineno}: {e}") from e
    return goldens

# training/record.py
import csv
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, List, Optional

RECORD_COLUMNS = ("epoch", "loss", "rel_l2", "lr", "seconds")


@dataclass(frozen=True)
class EpochRow:
    epoch: int
    loss: float
    rel_l2: float
    lr: float
    seconds: float


class TrainRecord:
    """에폭당 한 줄. path가 있으면 CSV에 바로 이어 쓴다."""

    def __init__(self, path: Optional[Path] = None, rows: Iterable[EpochRow] = ()):
        self.rows: List[EpochRow] = list(rows)
        self.path = Path(path) if path is not None else None
        if self.path is not None and not self.path.exists():
            self.path.parent.mkdir(parents=True, exist_ok=True)
            with self.path.open("w", newline="") as f:
                csv.writer(f).writerow(RECORD_COLUMNS)

    def append(self, row: EpochRow) -> None:
        if self.rows and row.epoch <= self.rows[-1].epoch:
            raise ValueError(f"epoch {row.epoch} does not follow {self.rows[-1].epoch}")
        self.rows.append(row)
        if self.path is not None:
            with self.path.open("a", newline="") as f:
                csv.writer(f).writerow([row.epoch, repr(row.loss), repr(row.rel_l2), repr(row.lr), f"{row.seconds:.6f}"])

    def __len__(self) -> int:
        return len(self.rows)

    @property
    def rel_l2(self) -> List[float]:
        return [r.rel_l2 for r in self.rows]


def read_record(path: Path) -> List[EpochRow]:
    with Path(path).open(newline="") as f:
        reader = csv.DictReader(f)
        if tuple(reader.fieldnames or ()) != RECORD_COLUMNS:
            raise ValueError(f"{path}: unexpected columns {reader.fieldnames}")
        return [
            EpochRow(int(r["epoch"]), float(r["loss"]), float(r["rel_l2"]), float(r["lr"]), float(r["seconds"]))
            for r in reader
        ]

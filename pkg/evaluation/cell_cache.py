# evaluation/cell_cache.py
import logging
from datetime import datetime
from pathlib import Path
from typing import List, Optional

import aiosqlite

from config.loader import KST
from model import StudyRow

logger = logging.getLogger(__name__)


class CellCache:
    """스터디 셀 (study, model, param, value, seed) 결과를 SQLite에 보관한다.

    fingerprint는 데이터셋과 학습 설정의 해시다. 설정이 바뀌면 같은 셀도 다시 계산된다.
    """

    def __init__(self, cache_dir: Path):
        self.cache_dir = Path(cache_dir)
        self.db_path = self.cache_dir / "cells.db"

    async def initialize(self):
        self.cache_dir.mkdir(parents=True, exist_ok=True)
        await self._setup_database()

    async def _setup_database(self):
        async with aiosqlite.connect(self.db_path) as conn:
            await conn.execute(
                """
                CREATE TABLE IF NOT EXISTS cells (
                    study TEXT NOT NULL,
                    model TEXT NOT NULL,
                    param TEXT NOT NULL,
                    value REAL NOT NULL,
                    seed INTEGER NOT NULL,
                    fingerprint TEXT NOT NULL,
                    error REAL,
                    seconds REAL NOT NULL,
                    failure TEXT,
                    finished_at TEXT NOT NULL,
                    PRIMARY KEY (study, model, param, value, seed, fingerprint)
                )
                """
            )
            await conn.commit()

    async def get(self, study: str, model: str, param: str, value: float, seed: int, fingerprint: str) -> Optional[StudyRow]:
        async with aiosqlite.connect(self.db_path) as conn:
            cursor = await conn.execute(
                """
                SELECT error, seconds, failure FROM cells
                WHERE study = ? AND model = ? AND param = ? AND value = ? AND seed = ? AND fingerprint = ?
                """,
                (study, model, param, float(value), int(seed), fingerprint),
            )
            row = await cursor.fetchone()
        if row is None:
            return None
        error, seconds, failure = row
        return StudyRow(
            study=study, model=model, seed=seed, param=param, value=value, error=error, seconds=seconds, failure=failure
        )

    async def put(self, row: StudyRow, fingerprint: str) -> None:
        # 실패한 셀은 남기지 않는다. 다음 실행에서 다시 시도한다.
        if row.failure is not None:
            return
        async with aiosqlite.connect(self.db_path) as conn:
            await conn.execute(
                """
                INSERT OR REPLACE INTO cells
                    (study, model, param, value, seed, fingerprint, error, seconds, failure, finished_at)
                VALUES (?, ?, ?, ?, ?, ?, ?, ?, ?, ?)
                """,
                (
                    row.study,
                    row.model,
                    row.param,
                    float(row.value),
                    int(row.seed),
                    fingerprint,
                    row.error,
                    float(row.seconds),
                    row.failure,
                    datetime.now(KST).isoformat(),
                ),
            )
            await conn.commit()
        logger.debug("cached %s/%s %s=%g seed %d", row.study, row.model, row.param, row.value, row.seed)

    async def rows(self, study: str, fingerprint: Optional[str] = None) -> List[StudyRow]:
        query = "SELECT model, param, value, seed, error, seconds, failure FROM cells WHERE study = ?"
        args: tuple = (study,)
        if fingerprint is not None:
            query += " AND fingerprint = ?"
            args += (fingerprint,)
        query += " ORDER BY model, param, value, seed"
        async with aiosqlite.connect(self.db_path) as conn:
            cursor = await conn.execute(query, args)
            fetched = await cursor.fetchall()
        return [
            StudyRow(study=study, model=m, param=p, value=v, seed=s, error=e, seconds=sec, failure=f)
            for m, p, v, s, e, sec, f in fetched
        ]

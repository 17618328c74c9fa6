# workers.py
import asyncio
import logging
from concurrent.futures import ProcessPoolExecutor
from typing import Callable, List, Optional, Sequence, TypeVar

from tqdm import tqdm

from config.log import progress_disabled
from config.settings import Config

logger = logging.getLogger(__name__)

T = TypeVar("T")
R = TypeVar("R")


def resolve_workers(workers: Optional[int]) -> int:
    if workers is None:
        workers = Config.THREADS
    return max(1, int(workers))


async def _gather(fn: Callable[[T], R], items: Sequence[T], workers: int, desc: str, return_exceptions: bool):
    loop = asyncio.get_running_loop()
    bar = tqdm(total=len(items), desc=desc, disable=progress_disabled(), leave=False)

    with ProcessPoolExecutor(max_workers=workers) as pool:

        async def run_one(item):
            try:
                return await loop.run_in_executor(pool, fn, item)
            finally:
                bar.update(1)

        tasks = [run_one(item) for item in items]
        try:
            # 제출 순서대로 결과를 모으므로 작업자 수와 무관하게 출력이 같다
            return await asyncio.gather(*tasks, return_exceptions=return_exceptions)
        finally:
            bar.close()


def _run_inline(fn, items, desc: str, return_exceptions: bool) -> List:
    results: List = []
    for item in tqdm(items, desc=desc, disable=progress_disabled(), leave=False):
        try:
            results.append(fn(item))
        except Exception as e:
            if not return_exceptions:
                raise
            results.append(e)
    return results


async def map_parallel(
    fn: Callable[[T], R],
    items: Sequence[T],
    workers: Optional[int] = None,
    desc: str = "work",
    return_exceptions: bool = False,
) -> List[R]:
    """이미 이벤트 루프 안에 있는 호출자용 run_parallel."""
    items = list(items)
    if not items:
        return []
    workers = min(resolve_workers(workers), len(items))
    if workers == 1:
        return _run_inline(fn, items, desc, return_exceptions)
    return await _gather(fn, items, workers, desc, return_exceptions)


def run_parallel(
    fn: Callable[[T], R],
    items: Sequence[T],
    workers: Optional[int] = None,
    desc: str = "work",
    return_exceptions: bool = False,
) -> List[R]:
    """순수 함수 fn을 items에 적용한다. 작업자가 1이면 프로세스 풀 없이 그대로 실행한다.

    fn은 피클 가능한 모듈 수준 함수여야 한다.
    """
    items = list(items)
    workers = min(resolve_workers(workers), max(1, len(items)))
    if workers == 1 or len(items) <= 1:
        return _run_inline(fn, items, desc, return_exceptions)

    logger.debug("%s: fanning %d items over %d processes", desc, len(items), workers)
    return asyncio.run(_gather(fn, items, workers, desc, return_exceptions))

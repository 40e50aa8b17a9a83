"""
Process pool for embarrassingly parallel sweep points
"""

import logging
import os
from concurrent.futures import ProcessPoolExecutor
from typing import Callable, List, Optional, Sequence, TypeVar

from cplnet.core.config import settings

logger = logging.getLogger(__name__)

T = TypeVar("T")
R = TypeVar("R")


def resolve_jobs(jobs: Optional[int] = None) -> int:
    """--jobs value, then CPLNET_DEFAULT_JOBS, then the processor count"""
    if jobs is None:
        jobs = settings.DEFAULT_JOBS
    if jobs is None:
        jobs = os.cpu_count() or 1
    return max(1, int(jobs))


def parallel_map(fn: Callable[[T], R], items: Sequence[T], jobs: Optional[int] = None) -> List[R]:
    """
    Map fn over items, results in input order

    jobs=1 (or a single item) runs in-process. fn and items must be picklable
    otherwise. Exceptions raised by fn propagate to the caller.
    """
    items = list(items)
    workers = min(resolve_jobs(jobs), len(items))
    if workers <= 1:
        return [fn(item) for item in items]
    logger.debug(f"Evaluating {len(items)} points on {workers} workers")
    chunksize = max(1, len(items) // (4 * workers))
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items, chunksize=chunksize))

from __future__ import annotations

import logging
import os
from concurrent.futures import ThreadPoolExecutor
from typing import Callable, Iterable, Optional, TypeVar

from django.conf import settings

logger = logging.getLogger(__name__)

T = TypeVar("T")
R = TypeVar("R")


def worker_count(override: Optional[int] = None) -> int:
    configured = override if override is not None else int(getattr(settings, "LSL_THREADS", 0))
    if configured <= 0:
        return max(1, os.cpu_count() or 1)
    return configured


def parallel_map(func: Callable[[T], R], items: Iterable[T], workers: Optional[int] = None) -> list[R]:
    """Map ``func`` over ``items`` and return results in input order.

    Work items must be pure; reductions happen on the returned list, so the
    outcome does not depend on the number of workers.
    """
    items = list(items)
    count = min(worker_count(workers), max(1, len(items)))
    if count == 1:
        return [func(item) for item in items]
    logger.debug("parallel_map: %d items on %d workers", len(items), count)
    with ThreadPoolExecutor(max_workers=count, thread_name_prefix="lsl-worker") as pool:
        return list(pool.map(func, items))

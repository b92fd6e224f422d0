import logging
from concurrent.futures import ThreadPoolExecutor
from typing import Callable, Iterable, List, TypeVar

T = TypeVar("T")
R = TypeVar("R")


def ordered_map(fn: Callable[[T], R], items: Iterable[T], threads: int = 1) -> List[R]:
    work = list(items)
    if threads <= 1 or len(work) <= 1:
        return [fn(item) for item in work]
    workers = min(threads, len(work))
    logging.debug("Dispatching %s tasks to %s threads", len(work), workers)
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, work))

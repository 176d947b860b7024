"""Thread-pool mapping with deterministic, index-ordered collection.

The compiled kernels release the GIL, so threads give real parallelism on the
hot loops; results are always collected in submission order so downstream
reductions are independent of the thread count.
"""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from typing import Callable, Iterable, Sequence, TypeVar

T = TypeVar("T")
R = TypeVar("R")

THREADS_ENV = "NEWTONLAB_THREADS"


def resolve_threads(threads: int | None = None) -> int:
    """Explicit argument, then NEWTONLAB_THREADS, then CPU count."""
    if threads is not None:
        if threads < 1:
            raise ValueError(f"thread count must be >= 1, got {threads}")
        return threads
    env = os.environ.get(THREADS_ENV)
    if env:
        try:
            val = int(env)
        except ValueError as exc:
            raise ValueError(f"{THREADS_ENV} must be an integer, got {env!r}") from exc
        if val < 1:
            raise ValueError(f"{THREADS_ENV} must be >= 1, got {val}")
        return val
    return os.cpu_count() or 1


def ordered_map(fn: Callable[[T], R], items: Sequence[T], threads: int) -> list[R]:
    """Map preserving input order regardless of completion order."""
    if threads <= 1 or len(items) <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, items))


def chunks(items: Sequence[T], size: int) -> Iterable[Sequence[T]]:
    for start in range(0, len(items), size):
        yield items[start: start + size]

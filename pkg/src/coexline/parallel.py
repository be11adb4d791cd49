"""Chunking and an ordered process pool for replica loops."""

from __future__ import annotations

import os
from concurrent.futures import ProcessPoolExecutor
from typing import Callable, Iterable, Iterator, TypeVar

T = TypeVar("T")
R = TypeVar("R")

WORKERS_ENV = "COEXLINE_WORKERS"


def resolve_workers(workers: int | None = None) -> int:
    """Explicit value, else ``$COEXLINE_WORKERS``, else 1."""
    if workers is None:
        env = os.environ.get(WORKERS_ENV)
        workers = int(env) if env else 1
    if workers < 1:
        raise ValueError(f"workers must be >= 1, got {workers}")
    return workers


def chunk_ranges(total: int, chunk: int, start: int = 0) -> list[tuple[int, int]]:
    chunk = max(1, int(chunk))
    return [(i, min(i + chunk, start + total)) for i in range(start, start + total, chunk)]


def map_ordered(fn: Callable[[T], R], tasks: Iterable[T], workers: int = 1) -> Iterator[R]:
    """Map in task order; results never depend on the worker count."""
    if workers <= 1:
        for t in tasks:
            yield fn(t)
        return
    with ProcessPoolExecutor(max_workers=workers) as pool:
        yield from pool.map(fn, tasks)

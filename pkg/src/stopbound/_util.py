"""Small shared helpers."""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from typing import Callable, Sequence, TypeVar

T = TypeVar("T")
R = TypeVar("R")

THREADS_ENV = "STOPBOUND_THREADS"


def resolve_threads(threads: int | None = None) -> int:
    """Thread budget: explicit argument, else STOPBOUND_THREADS (0 = auto)."""
    if threads is None:
        raw = os.environ.get(THREADS_ENV, "1")
        try:
            threads = int(raw)
        except ValueError:
            threads = 1
    if threads == 0:
        threads = os.cpu_count() or 1
    return max(1, threads)


def map_ordered(fn: Callable[[T], R], items: Sequence[T], threads: int) -> list[R]:
    """Map preserving input order; results identical to sequential evaluation."""
    if threads <= 1 or len(items) <= 1:
        return [fn(item) for item in items]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, items))


def fmt12(value: float) -> str:
    """Decimal notation with 12 significant digits for CSV output."""
    return f"{value:.12g}"

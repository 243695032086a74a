"""Deterministic work distribution.

Results never depend on the worker count: work is split into fixed-size
chunks, each chunk is computed independently, and partial results are
combined in chunk-index order.  HOMOG_THREADS caps the thread pool.
"""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor

_DEFAULT_CAP = 8


def worker_count() -> int:
    env = os.environ.get("HOMOG_THREADS", "")
    if env:
        try:
            n = int(env)
        except ValueError as exc:
            raise ValueError(f"HOMOG_THREADS must be an integer, got {env!r}") from exc
        return max(1, n)
    return max(1, min(os.cpu_count() or 1, _DEFAULT_CAP))


def det_map(fn, items):
    """Map fn over items, returning results in input order."""
    items = list(items)
    workers = worker_count()
    if workers == 1 or len(items) <= 1:
        return [fn(it) for it in items]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items))


def chunk_ranges(total: int, chunk: int):
    """Fixed-size index ranges [(lo, hi), ...] independent of worker count."""
    return [(lo, min(lo + chunk, total)) for lo in range(0, total, chunk)]

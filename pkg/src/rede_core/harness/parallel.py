"""Thread-capped, order-stable parallel map for per-sample work."""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor

__all__ = ["thread_cap", "ordered_map"]

_ENV_VAR = "REDE_CORE_THREADS"


def thread_cap() -> int:
    """Parallelism cap from ``REDE_CORE_THREADS``; 1 (serial) when unset or invalid."""
    raw = os.environ.get(_ENV_VAR)
    if raw is None:
        return 1
    try:
        return max(1, int(raw))
    except ValueError:
        return 1


def ordered_map(fn, items):
    """Apply ``fn`` over ``items`` preserving order, threading up to the cap.

    Every item must carry its own seeding, so scheduling can never change
    results.
    """
    items = list(items)
    cap = min(thread_cap(), max(1, len(items)))
    if cap <= 1:
        return [fn(item) for item in items]
    with ThreadPoolExecutor(max_workers=cap) as pool:
        return list(pool.map(fn, items))

"""Deterministic parallel map over independent work units.

Work units own their random streams (see rng.stream), so evaluation
order cannot change any result; the merge collects by index.  Worker
count therefore affects wall time only, never bytes of output.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor


def pmap(fn, items, workers: int = 1):
    """[fn(x) for x in items], optionally on a thread pool."""
    items = list(items)
    if workers <= 1 or len(items) <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items))

"""Experiment harness: data generation, file formats, benchmarks, and CLI."""

import os
from concurrent.futures import ThreadPoolExecutor


def worker_count():
    """Worker cap from RIM_THREADS (default 1 = sequential)."""
    try:
        return max(1, int(os.environ.get("RIM_THREADS", "1")))
    except ValueError:
        return 1


def worker_map(fn, items):
    """Order-preserving map, threaded when RIM_THREADS allows it.

    Cells are pure given their inputs, so threading changes wall-clock time
    only, never results.
    """
    items = list(items)
    workers = worker_count()
    if workers == 1 or len(items) < 2:
        return [fn(item) for item in items]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items))

"""Deterministic thread-pool mapping, capped by TORSIONLAB_THREADS."""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor


def thread_cap() -> int:
    env = os.environ.get("TORSIONLAB_THREADS", "")
    try:
        cap = int(env) if env else (os.cpu_count() or 1)
    except ValueError:
        cap = os.cpu_count() or 1
    return max(1, cap)


def parallel_map(fn, items):
    """Map preserving input order; sequential when the cap is 1.

    Workers release the GIL inside LAPACK/ARPACK calls, so threads help for
    eigen-sweeps; results are merged in input order, keeping output
    byte-identical to the sequential run.
    """
    items = list(items)
    cap = min(thread_cap(), len(items)) or 1
    if cap == 1 or len(items) <= 1:
        return [fn(item) for item in items]
    with ThreadPoolExecutor(max_workers=cap) as pool:
        return list(pool.map(fn, items))

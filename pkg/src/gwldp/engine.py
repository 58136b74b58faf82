"""Replicate-parallel execution with worker-count independent results.

Work is cut into fixed-size chunks of consecutive replicate indices.  Each
replicate draws from its own stream ``(master_seed, replicate_index)``, so a
chunk's output does not depend on which worker ran it; chunk results are
concatenated in index order.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from typing import Callable, Sequence

import numpy as np

CHUNK = 1 << 15


def chunks(total: int, size: int = CHUNK) -> list[tuple[int, int]]:
    return [(lo, min(lo + size, total)) for lo in range(0, total, size)]


def run_chunked(fn: Callable[[int, int], object], total: int,
                workers: int = 1, size: int = CHUNK) -> list:
    """Apply ``fn(start, count)`` to each chunk; results in chunk order."""
    parts = chunks(total, size)
    if workers <= 1 or len(parts) <= 1:
        return [fn(lo, hi - lo) for lo, hi in parts]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        futures = [pool.submit(fn, lo, hi - lo) for lo, hi in parts]
        return [f.result() for f in futures]


def concat(results: Sequence, axis: int = 0):
    if isinstance(results[0], tuple):
        return tuple(np.concatenate([r[i] for r in results], axis=axis)
                     for i in range(len(results[0])))
    return np.concatenate(results, axis=axis)

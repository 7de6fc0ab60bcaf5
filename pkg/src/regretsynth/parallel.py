"""Order-preserving parallel map capped by REGRET_SYNTH_THREADS."""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor


def thread_count() -> int:
    try:
        return max(1, int(os.environ.get("REGRET_SYNTH_THREADS", "1")))
    except ValueError:
        return 1


def parallel_map(fn, items):
    items = list(items)
    n = thread_count()
    if n <= 1 or len(items) <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=n) as ex:
        return list(ex.map(fn, items))

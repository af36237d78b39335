"""Order-preserving map over independent jobs, capped by ``COXNET_THREADS``."""

import os
from concurrent.futures import ThreadPoolExecutor


def thread_count() -> int:
    raw = os.environ.get("COXNET_THREADS", "0").strip() or "0"
    try:
        n = int(raw)
    except ValueError:
        raise ValueError(f"COXNET_THREADS must be an integer, got {raw!r}") from None
    if n < 0:
        raise ValueError("COXNET_THREADS must be >= 0")
    return n if n > 0 else (os.cpu_count() or 1)


def ordered_map(fn, items):
    """``list(map(fn, items))``, run on a thread pool when more than one thread is allowed.

    Results come back in input order, so callers reduce deterministically no
    matter how the jobs were scheduled.
    """
    items = list(items)
    workers = min(thread_count(), len(items))
    if workers <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items))

"""Order-preserving map over independent work items.

``ZSC_THREADS`` caps the worker count; unset or 1 means a plain serial map.
Results always come back in input order, so reductions downstream are
deterministic regardless of scheduling.
"""

import os
from concurrent.futures import ThreadPoolExecutor


def threads():
    try:
        return max(1, int(os.environ.get("ZSC_THREADS", "1")))
    except ValueError:
        return 1


def pmap(fn, items):
    items = list(items)
    n = min(threads(), len(items))
    if n <= 1:
        return [fn(item) for item in items]
    with ThreadPoolExecutor(max_workers=n) as pool:
        return list(pool.map(fn, items))

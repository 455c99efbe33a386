"""Order-preserving parallel map.

Results are always returned in input order and every task is computed
independently, so outputs do not depend on the worker count.
"""

import os
from concurrent.futures import ThreadPoolExecutor


def resolve_workers(workers=None):
    if workers is None:
        workers = os.environ.get("EVOEQ_WORKERS", 1)
    workers = int(workers)
    if workers < 1:
        raise ValueError(f"workers must be >= 1, got {workers}")
    return workers


def pmap(func, items, workers=1):
    items = list(items)
    workers = resolve_workers(workers)
    if workers == 1 or len(items) < 2:
        return [func(item) for item in items]
    with ThreadPoolExecutor(max_workers=min(workers, len(items))) as pool:
        return list(pool.map(func, items))

"""Worker-count control and order-preserving parallel map.

The ``GEOGUIDE_THREADS`` environment variable caps the worker count; ``0``
means auto (one worker per CPU). Unset defaults to serial execution, which
at desk scale is usually fastest. Results are always reduced in input
order, so parallel and serial runs agree.
"""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor

_ENV_VAR = "GEOGUIDE_THREADS"


def worker_count() -> int:
    raw = os.environ.get(_ENV_VAR)
    if raw is None:
        return 1
    try:
        value = int(raw)
    except ValueError:
        return 1
    if value < 0:
        return 1
    if value == 0:
        return os.cpu_count() or 1
    return value


def map_ordered(fn, items):
    """Apply ``fn`` to each item, in parallel when configured; order is kept."""
    items = list(items)
    workers = worker_count()
    if workers <= 1 or len(items) <= 1:
        return [fn(item) for item in items]
    with ThreadPoolExecutor(max_workers=min(workers, len(items))) as pool:
        return list(pool.map(fn, items))

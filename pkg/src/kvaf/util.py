"""Small shared helpers: worker pools, canonical JSON, config hashing."""

from __future__ import annotations

import concurrent.futures
import hashlib
import json
import os


def worker_count() -> int:
    """Worker cap from KVAF_THREADS (default 1; results never depend on it)."""
    raw = os.environ.get("KVAF_THREADS", "")
    try:
        n = int(raw)
    except ValueError:
        return 1
    return max(1, n)


def parallel_map(fn, items):
    """Order-preserving map, threaded when KVAF_THREADS > 1.

    Each item is processed independently and results are collected by
    index, so output is identical for any worker count.
    """
    items = list(items)
    workers = worker_count()
    if workers <= 1 or len(items) <= 1:
        return [fn(item) for item in items]
    with concurrent.futures.ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items))


def canonical_json(obj) -> str:
    return json.dumps(obj, sort_keys=True, separators=(",", ":"))


def config_hash(obj) -> str:
    return hashlib.sha256(canonical_json(obj).encode("utf-8")).hexdigest()

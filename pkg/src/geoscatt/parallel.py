"""Order-preserving parallel map over pure per-item functions."""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor


def parallel_map(fn, items, threads: int = 1) -> list:
    """Map ``fn`` over ``items``; output order always matches input order.

    Thread-based: the per-molecule work is numpy-heavy and releases the
    GIL in kernels. ``threads <= 1`` degrades to a plain loop.
    """
    items = list(items)
    if threads <= 1 or len(items) <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, items))

"""Deterministic chunked map over an index range.

The chunk layout depends only on (n_items, chunk_size), never on the worker
count, and results are merged in chunk order — so any reduction over the
returned list is bit-identical at 1 or N workers.
"""

from __future__ import annotations

from concurrent.futures import ProcessPoolExecutor
from typing import Callable, Sequence, TypeVar

T = TypeVar("T")


def chunk_ranges(n_items: int, chunk_size: int) -> list[tuple[int, int]]:
    if chunk_size < 1:
        raise ValueError(f"chunk_size must be >= 1, got {chunk_size}")
    return [(lo, min(lo + chunk_size, n_items)) for lo in range(0, n_items, chunk_size)]


def run_chunked(
    worker: Callable[[int, int], T],
    n_items: int,
    chunk_size: int,
    workers: int = 1,
) -> list[T]:
    """Evaluate worker(lo, hi) over fixed chunks, in chunk order.

    ``worker`` must be picklable (top-level function or functools.partial of
    one) when workers > 1.
    """
    ranges = chunk_ranges(n_items, chunk_size)
    if workers <= 1 or len(ranges) <= 1:
        return [worker(lo, hi) for lo, hi in ranges]
    with ProcessPoolExecutor(max_workers=min(workers, len(ranges))) as pool:
        futures = [pool.submit(worker, lo, hi) for lo, hi in ranges]
        return [f.result() for f in futures]


def merge_moment_sums(
    parts: Sequence[tuple[float, float, int]],
) -> tuple[float, float, int]:
    """Associatively merge (sum, sum_of_squares, count) triples in order."""
    total, total_sq, count = 0.0, 0.0, 0
    for s, sq, c in parts:
        total += s
        total_sq += sq
        count += c
    return total, total_sq, count

"""Block-parallel accumulation of ensemble moments with a reproducible reduction order."""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor, as_completed
from dataclasses import dataclass

import numpy as np

__all__ = ["Moments", "merge_dicts", "pairwise_reduce", "accumulate_blocks", "block_ranges", "default_block_size"]


@dataclass
class Moments:
    """Count, mean and centered sum of squares (Chan et al. merge)."""

    count: int
    mean: np.ndarray
    m2: np.ndarray

    @classmethod
    def of(cls, samples) -> "Moments":
        samples = np.asarray(samples, dtype=float)
        mean = samples.mean(axis=0)
        return cls(samples.shape[0], mean, ((samples - mean) ** 2).sum(axis=0))

    def merge(self, other: "Moments") -> "Moments":
        n = self.count + other.count
        if n == 0:
            return self
        delta = other.mean - self.mean
        mean = self.mean + delta * (other.count / n)
        m2 = self.m2 + other.m2 + delta**2 * (self.count * other.count / n)
        return Moments(n, mean, m2)

    @property
    def variance(self) -> np.ndarray:
        return self.m2 / max(self.count - 1, 1)

    @property
    def std_error(self) -> np.ndarray:
        return np.sqrt(self.variance / self.count)


def merge_dicts(a: dict, b: dict) -> dict:
    return {key: a[key].merge(b[key]) for key in a}


def pairwise_reduce(items, op):
    """Balanced binary reduction in a fixed order."""
    items = list(items)
    if not items:
        raise ValueError("nothing to reduce")
    while len(items) > 1:
        nxt = [op(items[i], items[i + 1]) for i in range(0, len(items) - 1, 2)]
        if len(items) % 2:
            nxt.append(items[-1])
        items = nxt
    return items[0]


def block_ranges(total: int, block_size: int):
    return [(s, min(block_size, total - s)) for s in range(0, total, block_size)]


def accumulate_blocks(block_fn, total: int, block_size: int, threads: int = 1, deterministic: bool = True):
    """Run ``block_fn(start, count) -> dict[str, Moments]`` over all blocks and merge.

    With ``deterministic`` the partial results are combined by a fixed
    pairwise tree over block order, so the output is bit-identical for any
    thread count.  Otherwise blocks are folded in completion order.
    """
    ranges = block_ranges(total, block_size)
    threads = max(1, int(threads or 1))
    if threads == 1:
        parts = [block_fn(s, c) for s, c in ranges]
        return pairwise_reduce(parts, merge_dicts) if deterministic else _fold(parts)
    with ThreadPoolExecutor(max_workers=threads) as pool:
        futures = [pool.submit(block_fn, s, c) for s, c in ranges]
        if deterministic:
            return pairwise_reduce([f.result() for f in futures], merge_dicts)
        return _fold(f.result() for f in as_completed(futures))


def _fold(parts):
    acc = None
    for part in parts:
        acc = part if acc is None else merge_dicts(acc, part)
    return acc


def default_block_size(points: int, budget: int = 1 << 21, cap: int = 1024) -> int:
    return int(max(1, min(cap, budget // max(points, 1))))

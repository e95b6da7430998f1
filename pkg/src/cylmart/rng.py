"""Seeded, splittable random streams and an order-preserving trial map.

Every stream is a Philox (counter-based) generator keyed by a
:class:`numpy.random.SeedSequence` whose spawn key is ``(stream, *sub)``.
Trials therefore draw from disjoint streams and can run in any order.
"""
from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Callable, Sequence, TypeVar

import numpy as np

T = TypeVar("T")

_MASK64 = (1 << 64) - 1


@dataclass(frozen=True)
class RngSeed:
    seed: int
    stream: int = 0

    def __post_init__(self):
        for name in ("seed", "stream"):
            v = getattr(self, name)
            if not isinstance(v, (int, np.integer)) or v < 0 or v > _MASK64:
                raise ValueError(f"{name} must be an unsigned 64-bit integer, got {v!r}")

    def generator(self, *sub: int) -> np.random.Generator:
        ss = np.random.SeedSequence(int(self.seed), spawn_key=(int(self.stream), *map(int, sub)))
        return np.random.Generator(np.random.Philox(ss))

    def child(self, i: int) -> "RngSeed":
        """Independent seed for trial ``i``; deterministic in (seed, stream, i)."""
        ss = np.random.SeedSequence(int(self.seed), spawn_key=(int(self.stream), 0xC17D, int(i)))
        return RngSeed(int(ss.generate_state(1, np.uint64)[0]), int(i))


def thread_count() -> int:
    env = os.environ.get("CYLMART_THREADS")
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            pass
    return max(1, min(8, os.cpu_count() or 1))


def trial_map(fn: Callable[[RngSeed], T], seed: RngSeed, n_trials: int,
              threads: int | None = None) -> list[T]:
    """Run ``fn(seed.child(i))`` for i < n_trials; results in trial order."""
    seeds = [seed.child(i) for i in range(n_trials)]
    threads = thread_count() if threads is None else threads
    if threads <= 1 or n_trials <= 1:
        return [fn(s) for s in seeds]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, seeds))


def mean_and_se(values: Sequence[float] | np.ndarray) -> tuple[float, float]:
    v = np.asarray(values, dtype=float)
    if v.size < 2:
        return float(v.mean()) if v.size else float("nan"), float("nan")
    return float(v.mean()), float(v.std(ddof=1) / np.sqrt(v.size))

"""Reproducible random streams.

Every experiment starts from a single root seed.  Sub-streams are derived by
appending integer counters to the ``spawn_key`` of a
:class:`numpy.random.SeedSequence`, so the stream for (root, k1, k2, ...) is a
pure function of its key.  Monte Carlo trials are cut into fixed-size blocks,
block ``b`` always draws from key ``(..., b)``, and per-block counts are added
exactly.  The result is therefore independent of how many workers run.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from typing import Callable, Union

import numpy as np

SeedLike = Union[int, np.random.SeedSequence]

#: Trials per Monte Carlo block; part of the reproducibility contract.
BLOCK_SIZE = 4096


def as_seed_sequence(seed: SeedLike) -> np.random.SeedSequence:
    if isinstance(seed, np.random.SeedSequence):
        return seed
    if isinstance(seed, (int, np.integer)) and not isinstance(seed, bool):
        if seed < 0:
            raise ValueError("seed must be non-negative")
        return np.random.SeedSequence(int(seed))
    raise TypeError(f"cannot build a seed sequence from {seed!r}")


def child(seed: SeedLike, *key: int) -> np.random.SeedSequence:
    """Counter-based sub-stream: same root and key always give the same stream."""
    ss = as_seed_sequence(seed)
    return np.random.SeedSequence(
        ss.entropy, spawn_key=tuple(ss.spawn_key) + tuple(int(k) for k in key),
        pool_size=ss.pool_size,
    )


def generator(seed: SeedLike) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(as_seed_sequence(seed)))


def describe(seed: SeedLike) -> list[int]:
    """JSON-friendly identity of a stream: ``[entropy, *spawn_key]``."""
    ss = as_seed_sequence(seed)
    return [int(ss.entropy), *(int(k) for k in ss.spawn_key)]


def block_sizes(trials: int, block: int = BLOCK_SIZE) -> list[int]:
    full, rest = divmod(int(trials), block)
    return [block] * full + ([rest] if rest else [])


def run_blocks(
    fn: Callable[[np.random.Generator, int], np.ndarray],
    seed: SeedLike,
    trials: int,
    threads: int = 1,
    block: int = BLOCK_SIZE,
) -> np.ndarray:
    """Sum ``fn(rng_b, size_b)`` over trial blocks.

    ``fn`` must return integer counts (any shape); integer addition keeps the
    total identical for every thread count.
    """
    sizes = block_sizes(trials, block)
    jobs = [(generator(child(seed, b)), size) for b, size in enumerate(sizes)]
    if threads <= 1 or len(jobs) <= 1:
        parts = [fn(rng, size) for rng, size in jobs]
    else:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            parts = list(pool.map(lambda job: fn(*job), jobs))
    total = np.zeros_like(np.asarray(parts[0]), dtype=np.int64)
    for part in parts:
        total += np.asarray(part, dtype=np.int64)
    return total

"""Per-task random streams.

Every unit of work gets its own generator derived from (master seed, task
index), so results depend only on how the work is chunked, never on how many
workers run the chunks.
"""

from __future__ import annotations

import numpy as np


def task_rng(master_seed: int, task: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(master_seed, spawn_key=(task,))))


def task_chunks(n: int, chunk: int) -> list[int]:
    """Sizes of fixed-size chunks covering n items."""
    if n <= 0 or chunk <= 0:
        raise ValueError("n and chunk must be positive")
    full, rest = divmod(n, chunk)
    return [chunk] * full + ([rest] if rest else [])

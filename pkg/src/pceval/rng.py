"""Project-wide pseudo-random number policy.

Every randomized operation in the package draws from a Philox4x64
counter-based generator seeded explicitly by the caller.  Child streams
(per cloud, per sweep cell) are derived through ``numpy.random.SeedSequence``
spawn keys, so the draw for a given (seed, context path) is independent of
evaluation order and thread scheduling.
"""

from __future__ import annotations

import numpy as np


def generator(seed: int) -> np.random.Generator:
    """Philox generator for a u64 seed."""
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(int(seed))))


def derive_seed(root: int, *path: int) -> int:
    """Mix a root seed with a context path into a new u64 seed.

    The same (root, path) always yields the same seed; distinct paths give
    statistically independent streams.
    """
    ss = np.random.SeedSequence(int(root), spawn_key=tuple(int(p) for p in path))
    return int(ss.generate_state(1, np.uint64)[0])

"""Seed derivation.

Every random stream is keyed by a master seed plus a tuple of integer
counters, so replications can run in any order (or in parallel) and still
draw exactly the same numbers.
"""
from __future__ import annotations

import numpy as np

SeedLike = int | np.random.Generator | None


def derive_rng(seed: SeedLike, *keys: int) -> np.random.Generator:
    """Return a generator for the stream identified by ``(seed, *keys)``.

    A :class:`numpy.random.Generator` passed as ``seed`` is returned
    unchanged when no keys are given, and otherwise used to draw a base
    seed (which consumes its state).
    """
    if isinstance(seed, np.random.Generator):
        if not keys:
            return seed
        seed = int(seed.integers(0, 2**63))
    if seed is None:
        seed = 0
    ss = np.random.SeedSequence(int(seed), spawn_key=tuple(int(k) for k in keys))
    return np.random.Generator(np.random.PCG64(ss))


def derive_seed(seed: SeedLike, *keys: int) -> int:
    """Integer seed for the stream ``(seed, *keys)``; handy for nested calls."""
    return int(derive_rng(seed, *keys).integers(0, 2**63))

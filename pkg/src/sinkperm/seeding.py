"""Deterministic seed derivation.

All randomness flows through numpy's PCG64 seeded by ``SeedSequence``.  Child
streams are derived from a master seed plus an integer path (``spawn_key``),
which keeps every scenario / repetition / permutation replica on an
independent, reproducible stream regardless of execution order.
"""

import numpy as np


def seed_sequence(master_seed: int, *path: int) -> np.random.SeedSequence:
    if master_seed < 0:
        raise ValueError("master seed must be a nonnegative integer")
    return np.random.SeedSequence(master_seed, spawn_key=tuple(path))


def spawn_rng(master_seed: int, *path: int) -> np.random.Generator:
    """Generator on the stream identified by (master_seed, path)."""
    return np.random.default_rng(seed_sequence(master_seed, *path))


def derive_seed(master_seed: int, *path: int) -> int:
    """Collapse (master_seed, path) into a single integer seed."""
    state = seed_sequence(master_seed, *path).generate_state(2, dtype=np.uint64)
    return int(state[0])

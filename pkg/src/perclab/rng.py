"""Deterministic seed derivation for ensemble runs.

All randomness flows from one master seed. Per-realization seeds are
derived order-independently by hashing (master_seed, index) through
numpy's SeedSequence spawn mechanism, which is documented to be stable
across platforms, so realization k draws the same stream no matter which
worker runs it or how many workers there are.
"""

from __future__ import annotations

import numpy as np


def spawn_seed(master_seed: int, index: int) -> int:
    """64-bit seed for realization `index` under `master_seed`."""
    master_seed = int(master_seed)
    if master_seed < 0:
        raise ValueError(f"master seed must be nonnegative, got {master_seed}")
    ss = np.random.SeedSequence(entropy=master_seed, spawn_key=(int(index),))
    return int(ss.generate_state(1, np.uint64)[0])


def stream(seed: int) -> np.random.Generator:
    """PCG64 generator for a single 64-bit (or larger nonnegative) seed."""
    seed = int(seed)
    if seed < 0:
        raise ValueError(f"seed must be nonnegative, got {seed}")
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed)))


def spawn_stream(master_seed: int, index: int) -> np.random.Generator:
    """Generator for realization `index` under `master_seed`."""
    return stream(spawn_seed(master_seed, index))

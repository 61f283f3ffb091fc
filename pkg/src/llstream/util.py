"""Seeding helpers shared across the package.

All randomness flows through ``numpy.random.Generator`` objects derived from
integer key tuples, so that every run is reproducible bit-for-bit from the
experiment seed alone.
"""

from __future__ import annotations

import numpy as np

# Namespacing tags so different subsystems never share a generator stream.
POOL_TAG = 1
INIT_TAG = 2
SHUFFLE_TAG = 3
BUFFER_TAG = 4
CROSSVAL_TAG = 5
SWEEP_TAG = 6


def rng_from(*keys: int) -> np.random.Generator:
    """Deterministic generator for a tuple of integer keys."""
    return np.random.default_rng(np.random.SeedSequence([int(k) for k in keys]))


def derive_seed(*keys: int) -> int:
    """Collapse a key tuple into a single reproducible integer seed."""
    seq = np.random.SeedSequence([int(k) for k in keys])
    return int(seq.generate_state(1, dtype=np.uint64)[0])

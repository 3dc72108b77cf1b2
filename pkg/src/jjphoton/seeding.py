"""Deterministic seed derivation.

Every random stream in the package is drawn from a ``numpy.random.Generator``
built from ``SeedSequence(entropy=master_seed, spawn_key=keys)``. Keys are
non-negative integers; string keys are mapped through CRC-32 so that names
such as ``"dark"`` or ``"mode"`` give stable, platform-independent streams.
Changing the master seed changes every derived stream; fixing it freezes
them regardless of evaluation order or worker count.
"""

from __future__ import annotations

import zlib

import numpy as np


def _key(k) -> int:
    if isinstance(k, (int, np.integer)):
        if k < 0:
            raise ValueError("seed keys must be non-negative")
        return int(k)
    return zlib.crc32(str(k).encode("utf-8"))


def seed_sequence(master: int, *keys) -> np.random.SeedSequence:
    return np.random.SeedSequence(entropy=int(master), spawn_key=tuple(_key(k) for k in keys))


def derive_rng(master: int, *keys) -> np.random.Generator:
    """Generator for the stream identified by ``keys`` under ``master``."""
    return np.random.default_rng(seed_sequence(master, *keys))


def derive_seed(master: int, *keys) -> int:
    """A 63-bit integer seed for the stream identified by ``keys``."""
    return int(seed_sequence(master, *keys).generate_state(1, dtype=np.uint64)[0] >> np.uint64(1))


def as_rng(seed) -> np.random.Generator:
    """Accept a Generator, an int seed, or a SeedSequence."""
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.default_rng(seed)

"""Seeded, splittable random number generation.

All randomness in the package flows through a counter-based generator
(Philox) keyed by a 64-bit master seed plus an integer path.  Trial ``t`` of
an experiment draws from ``generator(seed, t)``; distinct paths give
statistically independent streams, and the same ``(seed, path)`` always
reproduces the same stream regardless of thread schedule.  There is no hidden
global state.
"""
from __future__ import annotations

import numpy as np

__all__ = ["generator", "split"]


def generator(seed: int, *path: int) -> np.random.Generator:
    """Deterministic generator for the stream identified by ``(seed, *path)``."""
    ss = np.random.SeedSequence(seed, spawn_key=tuple(int(p) for p in path))
    return np.random.Generator(np.random.Philox(ss))


def split(seed: int, *path: int) -> int:
    """Derive an independent 64-bit child seed from ``seed`` and a path.

    ``split(seed, t)`` for t = 0, 1, ... yields seeds whose streams are
    mutually independent and deterministic.
    """
    ss = np.random.SeedSequence(seed, spawn_key=tuple(int(p) for p in path))
    return int(ss.generate_state(1, np.uint64)[0])

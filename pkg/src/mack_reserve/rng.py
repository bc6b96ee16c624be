"""Deterministic random substreams.

A seed is either a non-negative int or a tuple of ints whose first entry is
the master seed and whose remaining entries are a path of stream keys. The
generator for a path is Philox (counter-based) keyed through numpy's
``SeedSequence(master, spawn_key=path)``, so any substream can be rebuilt
directly from its path without replaying the others.
"""
from __future__ import annotations

import numpy as np

__all__ = ["CHUNK_SIZE", "derive", "generator", "normalize_seed", "chunks"]

# replications per substream; fixed so results never depend on worker count
CHUNK_SIZE = 1024


def normalize_seed(seed) -> tuple[int, ...]:
    if seed is None:
        raise ValueError("a seed is required; implicit time-based seeding is not supported")
    if isinstance(seed, (int, np.integer)):
        seed = (int(seed),)
    seed = tuple(int(s) for s in seed)
    if not seed or any(s < 0 for s in seed):
        raise ValueError(f"seed components must be non-negative ints, got {seed}")
    return seed


def derive(seed, *keys: int) -> tuple[int, ...]:
    """Path of the child stream ``keys`` below ``seed``."""
    return normalize_seed(seed) + tuple(int(k) for k in keys)


def generator(seed) -> np.random.Generator:
    path = normalize_seed(seed)
    ss = np.random.SeedSequence(path[0], spawn_key=path[1:])
    return np.random.Generator(np.random.Philox(ss))


def chunks(B: int, size: int = CHUNK_SIZE):
    """``(chunk_index, start, stop)`` triples covering ``range(B)``."""
    for c, start in enumerate(range(0, B, size)):
        yield c, start, min(start + size, B)

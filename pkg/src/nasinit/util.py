"""Small shared helpers."""

from __future__ import annotations

import zlib

import numpy as np


def ensure_rng(rng) -> np.random.Generator:
    """Accept a Generator, an integer seed, or None (fresh entropy)."""
    if isinstance(rng, np.random.Generator):
        return rng
    return np.random.default_rng(rng)


def stable_hash(*parts) -> int:
    """Platform-stable 32-bit hash of the stringified parts, for deriving
    per-run seeds from a global seed."""
    text = "|".join(str(p) for p in parts)
    return zlib.crc32(text.encode("utf-8"))


def run_seed(global_seed: int, algo: str, init: str, budget: int, run_index: int) -> int:
    """Effective seed of one search run: global seed XOR stable hash of the
    run coordinates."""
    return (int(global_seed) ^ stable_hash(algo, init, budget, run_index)) & 0x7FFFFFFF

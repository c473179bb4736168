"""Seeded random generators."""
from __future__ import annotations

import numpy as np


def make_rng(seed: int | None, *streams: int) -> np.random.Generator:
    """Generator for ``seed`` optionally split into an independent sub-stream."""
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=tuple(streams)) if streams else seed)


def derive_seed(rng: np.random.Generator) -> int:
    return int(rng.integers(0, 2**31 - 1))


__all__ = ["derive_seed", "make_rng"]

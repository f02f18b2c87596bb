"""Deterministic random-stream derivation.

Every randomized stage draws from its own substream keyed by (user seed,
stage tag, optional extra path such as a class code or tree index).  Stages
therefore never share or perturb each other's streams, and any single stage
is reproducible in isolation.
"""
from __future__ import annotations

import numpy as np

STREAM_SPLIT = 1
STREAM_UNDERSAMPLE = 2
STREAM_ADASYN = 3
STREAM_FOREST = 4
STREAM_MLP = 5


def substream(seed: int, *path: int) -> np.random.Generator:
    """Return a generator for the substream identified by ``path``."""
    if seed < 0:
        raise ValueError(f"seed must be non-negative, got {seed}")
    return np.random.default_rng([int(seed), *[int(p) for p in path]])

"""Reproducible random streams derived from a single root seed.

Every stochastic component takes an explicit seed; replication r of an
experiment draws from ``spawn(root_seed, tag, r)`` so runs are independent
and individually reproducible without sharing generator state.
"""

from __future__ import annotations

import numpy as np

_MASK64 = (1 << 64) - 1


def spawn(root_seed: int, *path: int) -> np.random.Generator:
    """Derive an independent generator from ``root_seed`` and a key path.

    The derivation is counter-based: the same ``(root_seed, *path)`` always
    yields the same stream, and distinct paths yield independent streams.
    """
    entropy = [int(k) & _MASK64 for k in (root_seed, *path)]
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(entropy)))

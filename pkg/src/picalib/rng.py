"""Splittable random streams.

Every unit of parallel work derives its own generator from
(master seed, index...), so results are a pure function of the master
seed and never depend on scheduling or worker count.
"""

from __future__ import annotations

import numpy as np


def stream(master_seed: int, *key: int) -> np.random.Generator:
    """Return the generator for stream ``key`` under ``master_seed``.

    The same (seed, key) pair always yields an identical generator;
    distinct keys yield statistically independent streams.
    """
    if master_seed < 0:
        raise ValueError("master seed must be non-negative")
    ss = np.random.SeedSequence(entropy=master_seed, spawn_key=tuple(int(k) for k in key))
    return np.random.Generator(np.random.PCG64(ss))

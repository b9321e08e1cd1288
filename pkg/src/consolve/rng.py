"""Deterministic random streams built on counter-based Philox bit generators.

Every stochastic component receives its own named stream derived from a root
seed plus a path of integers (purpose tag, instance index, chain index, ...).
Streams with different paths are statistically independent and do not share
state, so work can be reordered or parallelized across instances and sampling
chains without changing any draw.

Purpose tags are small module-level constants to keep paths collision-free
without stringly-typed keys.
"""

from __future__ import annotations

import numpy as np

# Purpose tags for stream paths. Values are arbitrary but frozen: changing
# them changes every downstream draw.
GENERATE = 1
LABEL = 2
TRAIN = 3
SOLVE = 4
EVAL = 5
VERIFY = 6


def stream(seed: int, *path: int) -> np.random.Generator:
    """Return an independent Generator for (seed, path).

    Args:
        seed: root seed for the run.
        path: integers naming the consumer, e.g. (SOLVE, instance_idx, chain).

    The same (seed, path) always yields the same draws; distinct paths yield
    independent streams (SeedSequence spawn-key semantics over Philox).
    """
    ss = np.random.SeedSequence(entropy=int(seed), spawn_key=tuple(int(p) for p in path))
    return np.random.Generator(np.random.Philox(ss))

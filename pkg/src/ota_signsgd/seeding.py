"""Named random streams derived from one master seed.

Each stream is keyed by a fixed tuple, so the draws a component sees do not
depend on how many other streams were created before it.
"""

import numpy as np

DATA = 0
PARTITION = 1
GEOMETRY = 2
INIT = 3
ROUNDS = 4
BOUNDS = 5
ORACLE = 6


def stream(seed: int, *key: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=tuple(key)))

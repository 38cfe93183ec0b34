"""Deterministic RNG stream derivation.

Every stochastic trial gets its own generator keyed on
(master seed, instance identity, trial length, trial index), so campaign
results do not depend on scheduling, chunking, or worker count.
"""
from __future__ import annotations

import numpy as np

_U64 = (1 << 64) - 1


def trial_rng(master_seed: int, instance, steps: int, trial: int) -> np.random.Generator:
    """Generator for one trial of one instance.

    `steps` (the trial length in integration steps or round trips) is part of
    the key so that different runtime settings draw independent noise.
    """
    key = (
        int(master_seed) & _U64,
        int(instance.seed) & _U64,
        int(instance.n),
        int(steps) & _U64,
        int(trial),
    )
    return np.random.default_rng(np.random.SeedSequence(key))


def derived_rng(master_seed: int, *salt: int) -> np.random.Generator:
    """Generator for a named substream of a master seed."""
    key = (int(master_seed) & _U64,) + tuple(int(s) & _U64 for s in salt)
    return np.random.default_rng(np.random.SeedSequence(key))

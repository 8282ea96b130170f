"""Counter-based random streams.

Every random number in a campaign is a pure function of
``(master_seed, trial_id, slot)``::

    trial_seed = mix64(mix64(master_seed) ^ trial_id)
    word       = mix64(trial_seed + (slot + 1) * GAMMA)
    uniform    = (word >> 11) * 2**-53

where ``mix64`` is the SplitMix64 finalizer and ``GAMMA`` its golden-ratio
increment, all arithmetic modulo 2**64. Draws therefore do not depend on
batching, thread count or completion order.
"""
from __future__ import annotations

import numpy as np

MASK64 = (1 << 64) - 1
GAMMA = 0x9E3779B97F4A7C15
_M1 = 0xBF58476D1CE4E5B9
_M2 = 0x94D049BB133111EB


def mix64_int(x: int) -> int:
    z = (x + GAMMA) & MASK64
    z = ((z ^ (z >> 30)) * _M1) & MASK64
    z = ((z ^ (z >> 27)) * _M2) & MASK64
    return z ^ (z >> 31)


def mix64(x: np.ndarray) -> np.ndarray:
    with np.errstate(over="ignore"):
        z = np.asarray(x, dtype=np.uint64) + np.uint64(GAMMA)
        z = (z ^ (z >> np.uint64(30))) * np.uint64(_M1)
        z = (z ^ (z >> np.uint64(27))) * np.uint64(_M2)
    return z ^ (z >> np.uint64(31))


def trial_seeds(master_seed: int, trial_ids) -> np.ndarray:
    base = np.uint64(mix64_int(int(master_seed) & MASK64))
    return mix64(np.asarray(trial_ids, dtype=np.uint64) ^ base)


def trial_seed(master_seed: int, trial_id: int) -> int:
    return mix64_int(mix64_int(int(master_seed) & MASK64) ^ int(trial_id))


def uniforms(seeds: np.ndarray, slot: int) -> np.ndarray:
    """One uniform in [0, 1) per seed for the given draw slot."""
    offset = np.uint64(((slot + 1) * GAMMA) & MASK64)
    with np.errstate(over="ignore"):
        words = mix64(np.asarray(seeds, dtype=np.uint64) + offset)
    return (words >> np.uint64(11)).astype(np.float64) * (1.0 / (1 << 53))

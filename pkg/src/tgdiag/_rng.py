"""Deterministic sub-seed derivation shared by every randomized component.

All randomness in this package flows through numpy generators seeded with
64-bit values derived by the splitmix64 finalizer.  Deriving one sub-seed
per work unit (per timestep, per epoch, ...) makes results independent of
thread count and evaluation order.

The exact recipe, so that reimplementations in other languages agree:

    mix(x):  z = (x + 0x9E3779B97F4A7C15) mod 2**64
             z = ((z ^ (z >> 30)) * 0xBF58476D1CE4B09B) mod 2**64
             z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) mod 2**64
             return z ^ (z >> 31)

    derive(seed, k1, k2, ...):
             state = mix(seed)
             for each key k:  state = mix(state ^ mix(k))
             return state
"""

from __future__ import annotations

import numpy as np

_MASK = (1 << 64) - 1


def splitmix64(x: int) -> int:
    """One application of the splitmix64 finalizer (mod 2**64)."""
    z = (x + 0x9E3779B97F4A7C15) & _MASK
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4B09B) & _MASK
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK
    return z ^ (z >> 31)


def derive_seed(seed: int, *keys: int) -> int:
    """Fold integer keys into ``seed``, yielding a new 64-bit sub-seed."""
    state = splitmix64(seed & _MASK)
    for k in keys:
        state = splitmix64(state ^ splitmix64(k & _MASK))
    return state


def make_rng(seed: int, *keys: int) -> np.random.Generator:
    """numpy generator seeded with ``derive_seed(seed, *keys)``."""
    return np.random.default_rng(derive_seed(seed, *keys))

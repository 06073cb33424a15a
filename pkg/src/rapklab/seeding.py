"""Deterministic 64-bit sub-seed derivation shared by every randomized component.

All randomness in the library flows through numpy's PCG64 generator, seeded
with integers produced by an explicit splitmix-style mixer. Keeping the mixer
in one place makes independence between streams (projection matrices,
Monte Carlo trials, per-subject draws) reproducible and easy to audit.
"""

from __future__ import annotations

import numpy as np

__all__ = ["MASK64", "splitmix64", "mix_seed", "generator"]

MASK64 = (1 << 64) - 1

_GAMMA = 0x9E3779B97F4A7C15
_MIX1 = 0xBF58476D1CE4E5B9
_MIX2 = 0x94D049BB133111EB


def splitmix64(value: int) -> int:
    """One splitmix64 step: advance by the golden gamma, then finalize."""
    z = (value + _GAMMA) & MASK64
    z = ((z ^ (z >> 30)) * _MIX1) & MASK64
    z = ((z ^ (z >> 27)) * _MIX2) & MASK64
    return z ^ (z >> 31)


def mix_seed(seed: int, *streams: int) -> int:
    """Derive a decorrelated 64-bit sub-seed from ``seed`` and stream keys.

    The base seed is finalized once, then each stream key is folded in with
    a further splitmix64 step. Nearby seeds and keys land far apart.
    """
    out = splitmix64(seed & MASK64)
    for key in streams:
        out = splitmix64(out ^ (key & MASK64))
    return out


def generator(seed: int, *streams: int) -> np.random.Generator:
    """PCG64 generator for the sub-seed ``mix_seed(seed, *streams)``."""
    return np.random.Generator(np.random.PCG64(mix_seed(seed, *streams)))

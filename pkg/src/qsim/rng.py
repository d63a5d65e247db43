"""Deterministic, splittable random streams.

All stochastic code in qsim draws from numpy's Philox counter-based bit
generator.  Substreams are derived from a 64-bit seed and a trial index
through a fixed splitmix64 finalizer, so any trial can be regenerated in
isolation and aggregates are independent of evaluation order:

    key(seed, index) = mix64(mix64(seed) + index)      (mod 2**64)

where mix64 is the splitmix64 output mixer

    z  = (x + 0x9E3779B97F4A7C15)            mod 2**64
    z ^= z >> 30;  z *= 0xBF58476D1CE4E5B9   mod 2**64
    z ^= z >> 27;  z *= 0x94D049BB133111EB   mod 2**64
    z ^= z >> 31

Test vectors live in docs/rng.md and tests/test_rng.py.
"""

from __future__ import annotations

import numpy as np

_MASK64 = (1 << 64) - 1


def mix64(x: int) -> int:
    """splitmix64 finalizer: a bijective 64-bit mixing function."""
    z = (x + 0x9E3779B97F4A7C15) & _MASK64
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
    return z ^ (z >> 31)


def substream_key(seed: int, index: int = 0) -> int:
    """64-bit Philox key for substream `index` of stream `seed`."""
    return mix64((mix64(seed & _MASK64) + (index & _MASK64)) & _MASK64)


def substream(seed: int, index: int = 0) -> np.random.Generator:
    """Independent generator for trial `index` under `seed`."""
    return np.random.Generator(np.random.Philox(key=substream_key(seed, index)))

"""Deterministic random number generation.

The generator is SplitMix64 (Steele, Lea & Flood 2014): 64-bit state advanced
by the golden-ratio increment 0x9E3779B97F4A7C15, output finalized with the
xor-shift/multiply chain 0xBF58476D1CE4E5B9 / 0x94D049BB133111EB. The k-th raw
output is a pure function of ``seed + k * increment``, which lets us evaluate
whole blocks of the stream with vectorized uint64 arithmetic while keeping the
sequential semantics of a single stream.

Derived quantities are fixed conventions of this package:

* uniform in [0, 1):  ``(raw >> 11) * 2**-53``
* uniform in (0, 1]:  ``((raw >> 11) + 1) * 2**-53``
* standard normals:   Box-Muller on consecutive (open, half-open) pairs
* integer in [0, n):  ``floor(uniform * n)`` (bias below n * 2**-53, negligible
  for the cohort sizes this package handles)
* shuffle:            Fisher-Yates, descending index, one integer draw each

Everything downstream that needs randomness (synthetic cohorts, fold
assignment, bootstrap resampling) goes through this module, so a seed pins the
entire pipeline output.
"""

from __future__ import annotations

import math

import numpy as np

_MASK64 = (1 << 64) - 1
_GAMMA = 0x9E3779B97F4A7C15
_MIX1 = 0xBF58476D1CE4E5B9
_MIX2 = 0x94D049BB133111EB


def _mix64(z: int) -> int:
    z = (z ^ (z >> 30)) * _MIX1 & _MASK64
    z = (z ^ (z >> 27)) * _MIX2 & _MASK64
    return z ^ (z >> 31)


def derive_seed(seed: int, tag: int) -> int:
    """Derive an independent child seed for a named sub-stream."""
    return _mix64((seed + (tag + 1) * _GAMMA) & _MASK64)


class SplitMix64:
    """Sequential 64-bit PRNG with vectorized block evaluation."""

    def __init__(self, seed: int):
        self._state = seed & _MASK64

    def raw(self, n: int) -> np.ndarray:
        """Next ``n`` raw 64-bit outputs as uint64."""
        base = np.uint64(self._state)
        idx = np.arange(1, n + 1, dtype=np.uint64)
        self._state = (self._state + n * _GAMMA) & _MASK64
        with np.errstate(over="ignore"):
            z = base + idx * np.uint64(_GAMMA)
            z = (z ^ (z >> np.uint64(30))) * np.uint64(_MIX1)
            z = (z ^ (z >> np.uint64(27))) * np.uint64(_MIX2)
        return z ^ (z >> np.uint64(31))

    def uniform(self, n: int) -> np.ndarray:
        """n uniforms in [0, 1)."""
        return (self.raw(n) >> np.uint64(11)).astype(np.float64) * 2.0**-53

    def uniform_open(self, n: int) -> np.ndarray:
        """n uniforms in (0, 1] (safe under log)."""
        return ((self.raw(n) >> np.uint64(11)) + np.uint64(1)).astype(np.float64) * 2.0**-53

    def normal(self, n: int) -> np.ndarray:
        """n standard normal draws via Box-Muller."""
        half = (n + 1) // 2
        u1 = self.uniform_open(half)
        u2 = self.uniform(half)
        r = np.sqrt(-2.0 * np.log(u1))
        theta = 2.0 * math.pi * u2
        z = np.concatenate([r * np.cos(theta), r * np.sin(theta)])
        return z[:n]

    def bernoulli(self, p: float, n: int) -> np.ndarray:
        return self.uniform(n) < p

    def integers(self, upper: int, n: int) -> np.ndarray:
        """n integers uniform on [0, upper)."""
        return np.minimum(
            (self.uniform(n) * upper).astype(np.int64), np.int64(upper - 1)
        )

    def shuffled(self, values: np.ndarray) -> np.ndarray:
        """Fisher-Yates shuffled copy of a 1-D array."""
        out = np.array(values)
        m = len(out)
        if m < 2:
            return out
        u = self.uniform(m - 1)
        for i in range(m - 1, 0, -1):
            j = min(int(u[m - 1 - i] * (i + 1)), i)
            out[i], out[j] = out[j], out[i]
        return out

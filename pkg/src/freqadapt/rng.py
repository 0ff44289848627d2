"""Deterministic random primitives shared by every seeded operation.

All randomness in the toolkit flows through :class:`SplitMix64`, so seeded
results are reproducible across platforms and releases. The generator and
the derived samplers are fixed, fully specified algorithms rather than
wrappers around a library RNG, because golden tests pin their exact output
streams:

* state update -- splitmix64 (Steele/Lea/Flood): one 64-bit word, golden
  gamma increment, xor-shift-multiply finalizer.
* uniforms -- top 53 bits of the next output word, scaled by 2**-53.
* normals -- Marsaglia polar method; one variate per accepted pair, the
  second variate of the pair is discarded.
* gammas -- Marsaglia-Tsang squeeze method for shape >= 1, with the
  u**(1/shape) boost below 1.
"""

from __future__ import annotations

import math

import numpy as np

_MASK64 = (1 << 64) - 1
_GOLDEN = 0x9E3779B97F4A7C15


def _finalize(z: int) -> int:
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
    return z ^ (z >> 31)


def mix_seed(seed: int, index: int) -> int:
    """Derive an independent substream seed from (seed, index).

    Applies the splitmix64 finalizer to ``seed + index * golden``; distinct
    indices give distinct, statistically independent seeds, and the result
    does not depend on any evaluation order.
    """
    return _finalize((seed + index * _GOLDEN) & _MASK64)


class SplitMix64:
    """Sequential 64-bit PRNG with fixed uniform/normal/gamma samplers."""

    def __init__(self, seed: int):
        self._state = seed & _MASK64

    def next_u64(self) -> int:
        self._state = (self._state + _GOLDEN) & _MASK64
        return _finalize(self._state)

    def uniform(self) -> float:
        """Uniform double in [0, 1) with 53 random bits."""
        return (self.next_u64() >> 11) * 2.0 ** -53

    def normal(self) -> float:
        """Standard normal via the Marsaglia polar method."""
        while True:
            u = 2.0 * self.uniform() - 1.0
            v = 2.0 * self.uniform() - 1.0
            s = u * u + v * v
            if 0.0 < s < 1.0:
                return u * math.sqrt(-2.0 * math.log(s) / s)

    def gamma(self, shape: float) -> float:
        """Gamma(shape, 1) variate via Marsaglia-Tsang."""
        if not shape > 0.0:
            raise ValueError(f"gamma shape must be > 0, got {shape}")
        if shape < 1.0:
            boost = self.uniform() ** (1.0 / shape)
            return self.gamma(shape + 1.0) * boost
        d = shape - 1.0 / 3.0
        c = 1.0 / math.sqrt(9.0 * d)
        while True:
            x = self.normal()
            v = 1.0 + c * x
            if v <= 0.0:
                continue
            v = v * v * v
            u = self.uniform()
            if u < 1.0 - 0.0331 * x * x * x * x:
                return d * v
            if u == 0.0 or math.log(u) < 0.5 * x * x + d * (1.0 - v + math.log(v)):
                return d * v

    def uniform_array(self, n: int, low: float = 0.0, high: float = 1.0) -> np.ndarray:
        vals = np.empty(n, dtype=np.float64)
        span = high - low
        for i in range(n):
            vals[i] = low + span * self.uniform()
        return vals

    def normal_array(self, n: int, scale: float = 1.0) -> np.ndarray:
        vals = np.empty(n, dtype=np.float64)
        for i in range(n):
            vals[i] = scale * self.normal()
        return vals

"""Portable seeded random numbers.

xoshiro256** (Blackman and Vigna) with its state filled by SplitMix64, so
a seed produces the same stream on every platform and in any language
that implements the same constants.  Derived variates:

* uniform: top 53 bits of a draw times 2**-53, in [0, 1)
* normal: Box-Muller cosine branch, one normal per two uniforms
* Poisson: CDF inversion for lam < 30, otherwise
  ``max(0, round(lam + sqrt(lam) * z))``
"""

from __future__ import annotations

import math

MASK64 = (1 << 64) - 1
GOLDEN = 0x9E3779B97F4A7C15
POISSON_INVERSION_LIMIT = 30.0


def _rotl(x: int, k: int) -> int:
    return ((x << k) | (x >> (64 - k))) & MASK64


def splitmix64(state: int) -> tuple[int, int]:
    """One SplitMix64 step; returns ``(new_state, output)``."""
    state = (state + GOLDEN) & MASK64
    z = state
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & MASK64
    return state, z ^ (z >> 31)


class Xoshiro256:
    def __init__(self, seed: int, stream: int = 0):
        sm = (int(seed) + int(stream) * 0xD1B54A32D192ED03) & MASK64
        s = []
        for _ in range(4):
            sm, out = splitmix64(sm)
            s.append(out)
        self.s = s

    def next_u64(self) -> int:
        s = self.s
        result = (_rotl((s[1] * 5) & MASK64, 7) * 9) & MASK64
        t = (s[1] << 17) & MASK64
        s[2] ^= s[0]
        s[3] ^= s[1]
        s[1] ^= s[2]
        s[0] ^= s[3]
        s[2] ^= t
        s[3] = _rotl(s[3], 45)
        return result

    def uniform(self) -> float:
        return (self.next_u64() >> 11) * (1.0 / 9007199254740992.0)

    def normal(self) -> float:
        u1 = 1.0 - self.uniform()  # (0, 1]
        u2 = self.uniform()
        return math.sqrt(-2.0 * math.log(u1)) * math.cos(2.0 * math.pi * u2)

    def poisson(self, lam: float) -> int:
        if lam < 0 or not math.isfinite(lam):
            raise ValueError(f"invalid Poisson mean {lam}")
        if lam == 0:
            return 0
        if lam >= POISSON_INVERSION_LIMIT:
            return max(0, int(round(lam + math.sqrt(lam) * self.normal())))
        u = self.uniform()
        k = 0
        prob = math.exp(-lam)
        cdf = prob
        while u > cdf and k < 1000:
            k += 1
            prob *= lam / k
            cdf += prob
        return k

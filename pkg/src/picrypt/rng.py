"""Deterministic 64-bit PRNG used wherever keys or samples must be portable.

SplitMix64 state transition with Lemire's multiply-shift bounded sampler
(rejection on the low word, so bounded draws are exactly uniform). Chosen
because it is a handful of integer operations that behave identically on
any platform; key generation, patch dropping and collision sampling all
consume one of these streams.
"""

from __future__ import annotations

_MASK64 = (1 << 64) - 1
_GAMMA = 0x9E3779B97F4A7C15
_MIX1 = 0xBF58476D1CE4E5B9
_MIX2 = 0x94D049BB133111EB


class SplitMix64:
    """Sequential stream of 64-bit words from a 64-bit seed."""

    __slots__ = ("state",)

    def __init__(self, seed: int):
        if not 0 <= seed <= _MASK64:
            raise ValueError(f"seed must be an unsigned 64-bit integer, got {seed}")
        self.state = seed

    def next_u64(self) -> int:
        self.state = (self.state + _GAMMA) & _MASK64
        z = self.state
        z = ((z ^ (z >> 30)) * _MIX1) & _MASK64
        z = ((z ^ (z >> 27)) * _MIX2) & _MASK64
        return z ^ (z >> 31)

    def next_below(self, n: int) -> int:
        """Uniform integer in [0, n), unbiased via rejection sampling.

        Multiplies a raw 64-bit word by n and keeps the high 64 bits; draws
        whose low word falls in the biased remainder zone are rejected.
        """
        if n <= 0:
            raise ValueError(f"n must be positive, got {n}")
        x = self.next_u64()
        m = x * n
        low = m & _MASK64
        if low < n:
            threshold = ((1 << 64) - n) % n
            while low < threshold:
                x = self.next_u64()
                m = x * n
                low = m & _MASK64
        return m >> 64

    def next_unit(self) -> float:
        """Uniform float in [0, 1) with 53 bits of precision."""
        return (self.next_u64() >> 11) * (1.0 / (1 << 53))

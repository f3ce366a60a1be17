"""Seedable, platform-stable PRNG used wherever reproducibility is contractual.

The generator is xorshift64* (Vigna 2016): state update
``x ^= x >> 12; x ^= x << 25; x ^= x >> 27`` over 64 bits, output
``x * 0x2545F4914F6CDD1D mod 2**64``.  Pure integer arithmetic, so the same
seed yields the same stream on every platform and Python version, unlike the
stdlib Mersenne Twister whose helper methods have shifted across releases.
"""

from __future__ import annotations

_MASK = (1 << 64) - 1
_MULT = 0x2545F4914F6CDD1D
# Seed 0 is a fixed point of xorshift; remap it to the 64-bit golden ratio.
_ZERO_SEED = 0x9E3779B97F4A7C15


class XorShift64Star:
    def __init__(self, seed: int):
        self._state = (seed & _MASK) or _ZERO_SEED

    def next_u64(self) -> int:
        x = self._state
        x ^= x >> 12
        x ^= (x << 25) & _MASK
        x ^= x >> 27
        self._state = x
        return (x * _MULT) & _MASK

    def randbelow(self, n: int) -> int:
        """Uniform integer in [0, n) via rejection sampling (no modulo bias)."""
        if n <= 0:
            raise ValueError("n must be positive")
        bound = (1 << 64) - ((1 << 64) % n)
        while True:
            draw = self.next_u64()
            if draw < bound:
                return draw % n

    def random(self) -> float:
        """Uniform float in [0, 1) from the top 53 bits."""
        return (self.next_u64() >> 11) / float(1 << 53)

    def shuffle(self, items: list) -> None:
        """In-place Fisher-Yates shuffle."""
        for i in range(len(items) - 1, 0, -1):
            j = self.randbelow(i + 1)
            items[i], items[j] = items[j], items[i]

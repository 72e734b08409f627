"""SplitMix64, in scalar and vectorized form.

The bit-exact definition lives in docs/prng.md. Both forms produce the same
sequence: output ``n`` (1-based) is ``mix64(seed + n * GOLDEN)`` mod 2**64,
so a block of outputs can be computed in one numpy expression.
"""

from __future__ import annotations

import numpy as np

MASK64 = (1 << 64) - 1
GOLDEN = 0x9E3779B97F4A7C15
_M1 = 0xBF58476D1CE4E5B9
_M2 = 0x94D049BB133111EB
_INV_2_53 = 1.0 / (1 << 53)


def mix64(z: int) -> int:
    z &= MASK64
    z = ((z ^ (z >> 30)) * _M1) & MASK64
    z = ((z ^ (z >> 27)) * _M2) & MASK64
    return z ^ (z >> 31)


def _mix64_array(z: np.ndarray) -> np.ndarray:
    # uint64 array arithmetic wraps mod 2**64
    z = (z ^ (z >> np.uint64(30))) * np.uint64(_M1)
    z = (z ^ (z >> np.uint64(27))) * np.uint64(_M2)
    return z ^ (z >> np.uint64(31))


def derive_seed(seed: int, stream: int) -> int:
    """Independent sub-stream seed for a named stream id."""
    return mix64((seed & MASK64) ^ mix64((stream * GOLDEN) & MASK64))


class SplitMix64:
    def __init__(self, seed: int):
        self.state = seed & MASK64

    def next_u64(self) -> int:
        self.state = (self.state + GOLDEN) & MASK64
        return mix64(self.state)

    def uniform(self) -> float:
        """Float in [0, 1) from the top 53 bits."""
        return (self.next_u64() >> 11) * _INV_2_53

    def below(self, n: int) -> int:
        """Integer in [0, n) as ``next_u64() % n``."""
        if n < 1:
            raise ValueError("n must be positive")
        return self.next_u64() % n

    def between(self, lo: int, hi: int) -> int:
        """Integer in [lo, hi] inclusive."""
        return lo + self.below(hi - lo + 1)

    def u64_block(self, count: int) -> np.ndarray:
        """The next ``count`` outputs as a uint64 array; advances the state past them."""
        steps = np.arange(1, count + 1, dtype=np.uint64)
        states = np.uint64(self.state) + steps * np.uint64(GOLDEN)
        self.state = (self.state + count * GOLDEN) & MASK64
        return _mix64_array(states)

    def uniform_block(self, shape) -> np.ndarray:
        count = int(np.prod(shape))
        bits = self.u64_block(count) >> np.uint64(11)
        return (bits.astype(np.float64) * _INV_2_53).reshape(shape)

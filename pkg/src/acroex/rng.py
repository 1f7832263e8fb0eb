"""Deterministic pseudo-randomness for init and shuffling.

Everything random in the toolkit draws from SplitMix64 so that a fixed seed
gives bit-identical runs on any platform, independent of the numpy version.
"""

from __future__ import annotations

import numpy as np

_MASK64 = (1 << 64) - 1
_GOLDEN = 0x9E3779B97F4A7C15


def _mix(z: np.ndarray) -> np.ndarray:
    # finalizer of splitmix64; operates on uint64 arrays, wrapping mod 2**64
    z = (z ^ (z >> np.uint64(30))) * np.uint64(0xBF58476D1CE4E5B9)
    z = (z ^ (z >> np.uint64(27))) * np.uint64(0x94D049BB133111EB)
    return z ^ (z >> np.uint64(31))


class SplitMix64:
    """Tiny seedable generator with an additive state walk.

    The additive state update makes block generation easy: the k-th draw after
    the current state is mix(state + k * GOLDEN), so uniform() can vectorize
    while staying identical to repeated next_u64() calls.
    """

    def __init__(self, seed: int):
        self._state = seed & _MASK64

    def next_u64(self) -> int:
        self._state = (self._state + _GOLDEN) & _MASK64
        z = np.asarray([self._state], dtype=np.uint64)
        return int(_mix(z)[0])

    def next_float(self) -> float:
        # top 53 bits -> uniform in [0, 1)
        return (self.next_u64() >> 11) * 2.0**-53

    def next_below(self, n: int) -> int:
        """Unbiased draw from range(n) via rejection sampling."""
        if n <= 0:
            raise ValueError("n must be positive")
        span = (_MASK64 + 1) - ((_MASK64 + 1) % n)
        while True:
            x = self.next_u64()
            if x < span:
                return x % n

    def uniform(self, low: float, high: float, shape) -> np.ndarray:
        """float64 array of i.i.d. uniform(low, high) draws."""
        shape = (shape,) if isinstance(shape, int) else tuple(shape)
        n = int(np.prod(shape)) if shape else 1
        ks = np.arange(1, n + 1, dtype=np.uint64) * np.uint64(_GOLDEN)
        ks += np.uint64(self._state)
        self._state = (self._state + n * _GOLDEN) & _MASK64
        unit = (_mix(ks) >> np.uint64(11)).astype(np.float64) * 2.0**-53
        return (low + (high - low) * unit).reshape(shape)

    def shuffle(self, items: list) -> None:
        """In-place Fisher-Yates shuffle."""
        for i in range(len(items) - 1, 0, -1):
            j = self.next_below(i + 1)
            items[i], items[j] = items[j], items[i]

    def split(self) -> "SplitMix64":
        """Independent child generator; advances this one by one draw."""
        return SplitMix64(self.next_u64())

"""
Reproducible sample points from a splitmix64 stream.

The generator is the standard splitmix64 sequence::

    state <- state + 0x9E3779B97F4A7C15 (mod 2^64)
    z <- state
    z <- (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9 (mod 2^64)
    z <- (z ^ (z >> 27)) * 0x94D049BB133111EB (mod 2^64)
    out <- z ^ (z >> 31)

and a uniform double in [0, 1) is ``(out >> 11) * 2^-53``. Everything is
integer arithmetic, so samples agree bit-for-bit across platforms.
"""

from __future__ import annotations

import numpy as np

from .finsler import PointOnSlit

_MASK = (1 << 64) - 1
_GOLDEN = 0x9E3779B97F4A7C15


class SplitMix64:
    def __init__(self, seed: int):
        self.state = int(seed) & _MASK

    def next_u64(self) -> int:
        self.state = (self.state + _GOLDEN) & _MASK
        z = self.state
        z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK
        z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK
        return z ^ (z >> 31)

    def uniform(self, lo: float = 0.0, hi: float = 1.0) -> float:
        return lo + (hi - lo) * ((self.next_u64() >> 11) * 2.0**-53)

    def uniform_vector(self, n: int, lo: float = -1.0, hi: float = 1.0) -> np.ndarray:
        return np.array([self.uniform(lo, hi) for _ in range(n)])

    def direction(self, n: int) -> np.ndarray:
        """Uniform unit vector by rejection from the cube."""
        while True:
            v = self.uniform_vector(n)
            r = float(np.linalg.norm(v))
            if 1e-3 < r <= 1.0:
                return v / r


def sample_points(n: int, count: int, seed: int, box=(-1.0, 1.0), y_shell=(0.5, 2.0)) -> list[PointOnSlit]:
    """``count`` points with x in the box and y on the shell r0 <= |y| <= r1."""
    rng = SplitMix64(seed)
    out = []
    for _ in range(count):
        x = rng.uniform_vector(n, *box)
        y = rng.direction(n) * rng.uniform(*y_shell)
        out.append(PointOnSlit(x, y))
    return out

"""Reproducible random streams.

Every replication gets its own stream. A stream is identified by a
``(seed, stream_index)`` pair; both are hashed through a SplitMix64
finalizer and the result seeds a PCG64 bit generator, so the draw
sequence is the same on every platform numpy supports.
"""

from __future__ import annotations

import numpy as np

_MASK = (1 << 64) - 1


def mix64(x: int) -> int:
    """SplitMix64 finalizer (64-bit avalanche)."""
    x = (x + 0x9E3779B97F4A7C15) & _MASK
    x = ((x ^ (x >> 30)) * 0xBF58476D1CE4E5B9) & _MASK
    x = ((x ^ (x >> 27)) * 0x94D049BB133111EB) & _MASK
    return x ^ (x >> 31)


def derive_key(seed: int, stream_index: int) -> int:
    return mix64(mix64(seed & _MASK) ^ mix64((stream_index & _MASK) ^ 0xD1B54A32D192ED03))


class RngStream:
    """A caller-owned random stream.

    Sampling functions advance ``self.gen`` in place; nothing else holds
    state, so streams may be used from different threads as long as each
    stream has a single owner.
    """

    __slots__ = ("seed", "stream_index", "gen")

    def __init__(self, seed: int, stream_index: int = 0):
        self.seed = int(seed) & _MASK
        self.stream_index = int(stream_index) & _MASK
        self.gen = np.random.Generator(np.random.PCG64(derive_key(self.seed, self.stream_index)))

    def __repr__(self) -> str:
        return f"RngStream(seed={self.seed}, stream_index={self.stream_index})"

    def random(self, size=None):
        return self.gen.random(size)

    def exponential(self, scale=1.0, size=None):
        return self.gen.exponential(scale, size)


def substream_index(cell: int, replication: int) -> int:
    """Stream index for replication ``replication`` of sweep cell ``cell``."""
    return ((cell & 0xFFFFFFFF) << 32) | (replication & 0xFFFFFFFF)

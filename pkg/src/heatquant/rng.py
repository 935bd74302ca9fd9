"""Counter-based random streams.

Every stream is a Philox generator whose 128-bit key is ``(seed, stream)``.
Draw ``i`` of a stream depends only on ``(seed, stream, i)``, so a Monte Carlo
trial keyed by its own stream id reproduces regardless of which worker runs it.
"""

from __future__ import annotations

import numpy as np

_U64 = 1 << 64
# bits reserved for the purpose tag when deriving child streams
CHILD_BITS = 16


class RngStream:
    def __init__(self, seed: int = 0, stream: int = 0):
        seed, stream = int(seed), int(stream)
        if not (0 <= seed < _U64 and 0 <= stream < _U64):
            raise ValueError("seed and stream must be unsigned 64-bit integers")
        self.seed = seed
        self.stream = stream
        self._bitgen = np.random.Philox(key=np.array([seed, stream], dtype=np.uint64))
        self._gen = np.random.Generator(self._bitgen)
        self.draws = 0

    def __repr__(self) -> str:
        return f"RngStream(seed={self.seed}, stream={self.stream}, draws={self.draws})"

    def uniform(self, size=None):
        """U[0, 1) variates; one per element of ``size`` (a float if ``size`` is None)."""
        out = self._gen.random(size)
        self.draws += 1 if size is None else int(np.prod(size))
        return out

    def child(self, tag: int) -> RngStream:
        """Independent stream for a sub-purpose of this one (same seed)."""
        if not 0 <= tag < (1 << CHILD_BITS):
            raise ValueError(f"tag must be in [0, {1 << CHILD_BITS})")
        stream = (self.stream << CHILD_BITS) | tag
        if stream >= _U64:
            raise ValueError("stream id overflow; nest children at most a few levels deep")
        return RngStream(self.seed, stream)

    def copy(self) -> RngStream:
        other = RngStream.__new__(RngStream)
        other.seed, other.stream, other.draws = self.seed, self.stream, self.draws
        other._bitgen = np.random.Philox()
        other._bitgen.state = self._bitgen.state
        other._gen = np.random.Generator(other._bitgen)
        return other

    __copy__ = copy

    def __deepcopy__(self, memo):
        return self.copy()

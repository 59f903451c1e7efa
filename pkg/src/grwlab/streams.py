"""Counter-based random streams keyed by ``(seed, stream_id)``.

Each trajectory owns one stream. Philox is a counter-based generator, so a
stream depends only on its key and never on which worker ran it or when.
"""

from __future__ import annotations

import numpy as np

_MASK64 = (1 << 64) - 1


class RandomStream:
    def __init__(self, seed: int, stream_id: int = 0):
        self.seed = int(seed) & _MASK64
        self.stream_id = int(stream_id) & _MASK64
        self._bitgen = np.random.Philox(key=(self.seed << 64) | self.stream_id)
        self.generator = np.random.Generator(self._bitgen)

    def __repr__(self):
        return f"RandomStream(seed={self.seed}, stream_id={self.stream_id}, counter={self.counter})"

    @property
    def counter(self) -> int:
        c = self._bitgen.state["state"]["counter"]
        return int(sum(int(w) << (64 * i) for i, w in enumerate(c)))

    def random(self, size=None):
        return self.generator.random(size)

    def exponential(self, scale=1.0, size=None):
        return self.generator.exponential(scale, size)

    def standard_normal(self, size=None):
        return self.generator.standard_normal(size)

    def normal(self, scale=1.0, size=None):
        return scale * self.generator.standard_normal(size)

    def spawn(self, stream_id: int) -> "RandomStream":
        return RandomStream(self.seed, stream_id)


def as_stream(rng, stream_id: int = 0) -> RandomStream:
    """Accept a RandomStream or an integer seed."""
    if isinstance(rng, RandomStream):
        return rng
    return RandomStream(int(rng), stream_id)

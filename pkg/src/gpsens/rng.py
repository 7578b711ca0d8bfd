"""Counter-based random number streams.

Every stream is addressed by a (seed, stream_id, counter) triple keyed into
the Philox 4x64 generator.  Identical triples reproduce identical draws;
distinct stream_ids are statistically independent streams, so auxiliary
uniforms for different purposes (e.g. the two uniforms consumed by the
maximal-coupling sampler, or per-observation noise) never share state.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

_MASK64 = (1 << 64) - 1


def _mix64(z: int) -> int:
    # splitmix64 finalizer; good avalanche for deriving sub-stream ids
    z = (z + 0x9E3779B97F4A7C15) & _MASK64
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
    return z ^ (z >> 31)


@dataclass(frozen=True)
class RngStream:
    """One independent, reproducible uniform stream.

    Attributes
    ----------
    seed : int
        Global experiment seed.
    stream_id : int
        Identifies the purpose of the stream (fold, observation, usage).
    counter : int
        Block offset into the stream; draws never mutate the object, use
        :meth:`advanced` to address later blocks.
    """

    seed: int
    stream_id: int = 0
    counter: int = 0

    def _generator(self) -> np.random.Generator:
        key = np.array([self.seed & _MASK64, self.stream_id & _MASK64],
                       dtype=np.uint64)
        counter = np.array([self.counter & _MASK64, 0, 0, 0], dtype=np.uint64)
        return np.random.Generator(np.random.Philox(key=key, counter=counter))

    def derive(self, *tags: int) -> "RngStream":
        """Child stream whose id hashes the parent id with ``tags``."""
        h = self.stream_id
        for t in tags:
            h = _mix64(h ^ _mix64(t & _MASK64))
        return RngStream(self.seed, h, 0)

    def advanced(self, blocks: int) -> "RngStream":
        """Same stream, skipped ahead by ``blocks`` counter blocks."""
        return replace(self, counter=self.counter + blocks)

    def uniforms(self, n: int) -> np.ndarray:
        """``n`` iid Uniform[0,1) variates."""
        return self._generator().random(n)

    def normals(self, n: int, scale: float = 1.0) -> np.ndarray:
        """``n`` iid centered Gaussian variates with standard deviation ``scale``."""
        return self._generator().normal(0.0, scale, n)

    def permutation(self, n: int) -> np.ndarray:
        return self._generator().permutation(n)

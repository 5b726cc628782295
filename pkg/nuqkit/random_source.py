"""
Reproducible randomness for quantization, oracles and simulations.

Each ``RandomSource`` is a pair (seed, stream id) mapped onto the key of a
counter-based Philox generator. The n-th uniform of a source does not depend
on anything but (seed, stream, n), so draws can be taken in any order or
partitioned between workers without changing results.
"""

import numpy as np

from nuqkit.errors import PreconditionError

gMask64 = (1 << 64) - 1

def splitmix64(x):
    """
    Finalizer of the SplitMix64 generator. Used to derive well-separated
    stream ids from structured keys (iteration number, worker id, etc).
    """
    x = (x + 0x9E3779B97F4A7C15) & gMask64
    x = ((x ^ (x >> 30)) * 0xBF58476D1CE4E5B9) & gMask64
    x = ((x ^ (x >> 27)) * 0x94D049BB133111EB) & gMask64
    return x ^ (x >> 31)

class RandomSource(object):
    """
    Immutable (seed, stream id) pair producing a deterministic draw sequence.
    """
    def __init__(self, seed, stream=0):
        for name, value in (('seed', seed), ('stream id', stream)):
            if not isinstance(value, (int, np.integer)) or isinstance(value, bool):
                raise PreconditionError(f'Random {name} must be an integer, got {value!r}')
            if not 0 <= int(value) <= gMask64:
                raise PreconditionError(f'Random {name} {value} is not a 64-bit unsigned integer')
        self._seed = int(seed)
        self._stream = int(stream)

    @property
    def seed(self):
        return self._seed

    @property
    def stream(self):
        return self._stream

    def generator(self):
        """Returns fresh numpy generator positioned at the stream's start."""
        return np.random.Generator(np.random.Philox(key=(self._seed << 64) | self._stream))

    def uniforms(self, shape):
        """First ``prod(shape)`` uniforms of [0, 1) of the stream."""
        return self.generator().random(shape)

    def child(self, *keys):
        """
        Derives source of independent stream keyed by integers in ``keys``
        (same seed).
        """
        h = self._stream
        for k in keys:
            if int(k) < 0:
                raise PreconditionError(f'Stream key must be non-negative, got {k}')
            h = splitmix64(h ^ splitmix64(int(k) & gMask64))
        return RandomSource(self._seed, h)

    def __eq__(self, other):
        if not isinstance(other, RandomSource): return NotImplemented
        return (self._seed, self._stream) == (other._seed, other._stream)

    def __hash__(self):
        return hash((self._seed, self._stream))

    def __repr__(self):
        return f'RandomSource(seed={self._seed}, stream={self._stream:#x})'

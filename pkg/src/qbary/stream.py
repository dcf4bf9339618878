"""Seeded, restartable sources of posterior draws."""

from __future__ import annotations

import itertools
from typing import Any, Callable, Iterable, Sequence

import numpy as np

_KEEP = object()


class SampleStream:
    """Iterator over draws produced by ``factory(rng)``.

    ``reset(seed)`` restarts the stream from a fresh generator, so two streams
    with the same factory and seed yield identical draws. ``fork(seed)``
    returns an independent stream over the same source.
    """

    def __init__(self, factory: Callable[[np.random.Generator], Iterable], seed=None, name: str = "stream"):
        self._factory = factory
        self.name = name
        self.reset(seed)

    def __repr__(self):
        return f"SampleStream({self.name!r}, seed={self.seed!r})"

    @classmethod
    def from_draw(cls, draw: Callable[[np.random.Generator], Any], seed=None, name="draws"):
        """Infinite stream calling ``draw(rng)`` once per item."""
        return cls(lambda rng: (draw(rng) for _ in itertools.count()), seed, name)

    @classmethod
    def from_samples(cls, samples: Sequence, seed=None, resample: bool = False, name="samples"):
        """Stream over a fixed sample list: in order (finite) or resampled uniformly with replacement."""
        samples = list(samples)
        if not resample:
            return cls(lambda rng: iter(samples), seed, name)
        if not samples:
            raise ValueError("cannot resample from an empty sample list")
        n = len(samples)
        return cls(lambda rng: (samples[int(rng.integers(n))] for _ in itertools.count()), seed, name)

    def reset(self, seed=_KEEP):
        if seed is not _KEEP:
            self.seed = seed
        self._rng = np.random.default_rng(self.seed)
        self._it = iter(self._factory(self._rng))
        self.drawn = 0
        return self

    def fork(self, seed) -> "SampleStream":
        return SampleStream(self._factory, seed, self.name)

    def __iter__(self):
        return self

    def __next__(self):
        item = next(self._it)
        self.drawn += 1
        return item

    def take(self, n: int) -> list:
        return list(itertools.islice(self, n))

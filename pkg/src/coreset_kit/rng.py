"""Counter-based splittable randomness.

Every sampling operation in this package takes an explicit ``SeededRng``.
Streams are identified by a (seed, path) pair; child streams extend the
path, so independent sub-experiments (per repetition copy, per sampling
plan, per column) can be derived deterministically without sharing state.
"""

from __future__ import annotations

import numpy as np


class SeededRng:
    """Deterministic random stream keyed by (seed, path).

    Identical (seed, path) pairs yield identical draws.  Children derived
    via :meth:`child` use disjoint Philox key spaces and are independent
    by construction.
    """

    def __init__(self, seed: int, path: tuple[int, ...] = ()):
        self.seed = int(seed)
        self.path = tuple(int(x) for x in path)
        ss = np.random.SeedSequence(entropy=self.seed, spawn_key=self.path)
        self._gen = np.random.Generator(np.random.Philox(ss))

    @property
    def gen(self) -> np.random.Generator:
        return self._gen

    def child(self, *indices: int) -> "SeededRng":
        """Fresh stream at path ``path + indices``; does not consume state."""
        return SeededRng(self.seed, self.path + tuple(indices))

    # Thin pass-throughs for the common draws; all consume self's stream.
    def uniform(self, low=0.0, high=1.0, size=None):
        return self._gen.uniform(low, high, size)

    def normal(self, loc=0.0, scale=1.0, size=None):
        return self._gen.normal(loc, scale, size)

    def integers(self, low, high=None, size=None):
        return self._gen.integers(low, high, size)

    def exponential(self, scale=1.0, size=None):
        return self._gen.exponential(scale, size)

    def random(self, size=None):
        return self._gen.random(size)

    def choice(self, a, size=None, replace=True, p=None):
        return self._gen.choice(a, size=size, replace=replace, p=p)

    def permutation(self, x):
        return self._gen.permutation(x)

    def __repr__(self) -> str:
        return f"SeededRng(seed={self.seed}, path={self.path})"

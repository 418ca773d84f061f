"""Seeded random streams.

Every random draw in the package flows from a ``numpy.random.Generator``.
Child stream ``k`` of seed ``s`` is a pure function of ``(s, k)`` (via
``SeedSequence`` spawn keys), so workers get reproducible, non-overlapping
streams regardless of scheduling.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

MAX_SEED = 2**64 - 1


@dataclass(frozen=True)
class RandomStreams:
    seed: int

    def __post_init__(self):
        if not 0 <= int(self.seed) <= MAX_SEED:
            raise ValueError(f"seed must be a 64-bit unsigned integer, got {self.seed}")

    @property
    def root(self) -> np.random.Generator:
        return np.random.Generator(np.random.PCG64(np.random.SeedSequence(int(self.seed))))

    def child(self, k: int) -> np.random.Generator:
        ss = np.random.SeedSequence(int(self.seed), spawn_key=(int(k),))
        return np.random.Generator(np.random.PCG64(ss))

    def children(self, start: int, stop: int) -> list[np.random.Generator]:
        return [self.child(k) for k in range(start, stop)]


def seed_rng(seed: int) -> RandomStreams:
    return RandomStreams(int(seed))

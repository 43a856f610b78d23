"""Seeded random stream used by every stochastic operation.

Backed by numpy's PCG64 bit generator seeded through ``SeedSequence``.
Each draw is one ``Generator.random()`` call, i.e. ``(next_uint64 >> 11) * 2**-53``.
Discrete choices are derived from a single uniform as ``floor(u * n)`` so the
number of draws per operation is fixed and documented at each call site.
"""
from __future__ import annotations

import numpy as np

MAX_SEED = 2**64 - 1


class RngStream:
    def __init__(self, seed: int, spawn_key: tuple[int, ...] = ()):
        if not 0 <= seed <= MAX_SEED:
            raise ValueError(f"seed must be a 64-bit unsigned integer, got {seed}")
        self.seed = seed
        self.spawn_key = tuple(spawn_key)
        seq = np.random.SeedSequence(entropy=seed, spawn_key=self.spawn_key)
        self._gen = np.random.Generator(np.random.PCG64(seq))
        self.draws = 0

    def uniform(self) -> float:
        """One draw in [0, 1)."""
        self.draws += 1
        return float(self._gen.random())

    def choice(self, n: int) -> int:
        """Uniform index in 0..n-1 from one draw."""
        return min(int(self.uniform() * n), n - 1)

    def categorical(self, probs) -> int:
        """Inverse-CDF sample from one draw; never returns a zero-mass index."""
        u = self.uniform()
        acc = 0.0
        last = 0
        for i, p in enumerate(probs):
            if p <= 0.0:
                continue
            acc += p
            last = i
            if u < acc:
                return i
        return last

    def derive(self, *key: int) -> "RngStream":
        """Independent stream keyed on ``(seed, *key)``, e.g. an episode index."""
        return RngStream(self.seed, self.spawn_key + tuple(key))

    def __repr__(self) -> str:
        return f"RngStream(seed={self.seed}, spawn_key={self.spawn_key}, draws={self.draws})"

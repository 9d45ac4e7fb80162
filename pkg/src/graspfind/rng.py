"""Seeded randomness with labeled child streams.

All stochastic code in this package draws from an :class:`Rng`. A given seed
produces the same stream on every run and platform, and child streams derived
from (seed, label) are independent and reproducible, so parallel workers can
each own a stream without coordinating.
"""

from __future__ import annotations

import hashlib

import numpy as np

__all__ = ["Rng"]


def _derive_seed(seed: int, label: str) -> int:
    digest = hashlib.sha256(f"{seed}/{label}".encode("utf-8")).digest()
    return int.from_bytes(digest[:8], "little")


class Rng:
    """Deterministic random stream (PCG64) addressable by (seed, label)."""

    def __init__(self, seed: int):
        self.seed = int(seed) & 0xFFFFFFFFFFFFFFFF
        self.np = np.random.Generator(np.random.PCG64(self.seed))

    def child(self, label: str) -> "Rng":
        """Independent stream derived from this stream's seed and a label."""
        return Rng(_derive_seed(self.seed, label))

    # Thin pass-throughs for the handful of draws the package uses. Anything
    # fancier should go through .np directly.
    def random(self, size=None):
        return self.np.random(size)

    def uniform(self, low=0.0, high=1.0, size=None):
        return self.np.uniform(low, high, size)

    def normal(self, loc=0.0, scale=1.0, size=None):
        return self.np.normal(loc, scale, size)

    def integers(self, low, high=None, size=None):
        return self.np.integers(low, high, size)

    def choice(self, n, size, replace=False):
        return self.np.choice(n, size=size, replace=replace)

    def shuffle(self, x) -> None:
        self.np.shuffle(x)

    def unit_vector(self) -> np.ndarray:
        """Uniform draw from the unit sphere."""
        while True:
            v = self.np.normal(size=3)
            n = np.linalg.norm(v)
            if n > 1e-12:
                return v / n

    def __repr__(self) -> str:
        return f"Rng(seed={self.seed})"

"""Counter-based per-history random streams (SplitMix64 finalizer).

A draw is a pure function of (seed, history index, draw counter), so results do
not depend on how histories are grouped into chunks, batches or threads.
"""
from __future__ import annotations

import numpy as np

_GOLDEN = np.uint64(0x9E3779B97F4A7C15)
_M1 = np.uint64(0xBF58476D1CE4E5B9)
_M2 = np.uint64(0x94D049BB133111EB)
_UNIT = 2.0 ** -53


def mix64(z: np.ndarray) -> np.ndarray:
    z = np.asarray(z, dtype=np.uint64)
    with np.errstate(over="ignore"):
        z = (z ^ (z >> np.uint64(30))) * _M1
        z = (z ^ (z >> np.uint64(27))) * _M2
    return z ^ (z >> np.uint64(31))


def history_keys(seed: int, histories: np.ndarray) -> np.ndarray:
    base = mix64(np.array([seed & 0xFFFFFFFFFFFFFFFF], dtype=np.uint64))
    with np.errstate(over="ignore"):
        return mix64(base + np.asarray(histories, dtype=np.uint64) * _GOLDEN)


def to_unit(z: np.ndarray) -> np.ndarray:
    """Top 53 bits mapped to the open interval (0, 1)."""
    return ((z >> np.uint64(11)).astype(np.float64) + 0.5) * _UNIT


class HistoryStreams:
    """One stream per live history; ``compress`` drops finished ones."""

    def __init__(self, seed: int, histories: np.ndarray):
        self.histories = np.asarray(histories, dtype=np.int64)
        self.keys = history_keys(seed, self.histories)
        self.counters = np.zeros(self.keys.size, dtype=np.uint64)

    def __len__(self) -> int:
        return self.keys.size

    def draw(self) -> np.ndarray:
        with np.errstate(over="ignore"):
            self.counters += np.uint64(1)
            z = mix64(self.keys + self.counters * _GOLDEN)
        return to_unit(z)

    def draws(self, n: int) -> np.ndarray:
        """(n, live) block of consecutive draws."""
        return np.stack([self.draw() for _ in range(n)])

    def compress(self, keep: np.ndarray) -> None:
        self.histories = self.histories[keep]
        self.keys = self.keys[keep]
        self.counters = self.counters[keep]

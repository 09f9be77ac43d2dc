from __future__ import annotations
from dataclasses import dataclass, field
from typing import List, Optional

import numpy as np

from nct.utils.grid import SpatialGrid


@dataclass
class ChunkTally:
    """Raw (unnormalized) scores of a group of histories."""

    n_cells: int
    n_mu: int = 0
    histories: int = 0
    track: np.ndarray = field(default=None)
    collisions: np.ndarray = field(default=None)
    psi_track: Optional[np.ndarray] = None
    emitted: int = 0
    absorbed: int = 0
    leaked: int = 0
    scatters: int = 0

    def __post_init__(self) -> None:
        if self.track is None:
            self.track = np.zeros(self.n_cells)
        if self.collisions is None:
            self.collisions = np.zeros(self.n_cells)
        if self.n_mu and self.psi_track is None:
            self.psi_track = np.zeros((self.n_cells, self.n_mu))

    def merge(self, other: "ChunkTally") -> None:
        self.histories += other.histories
        self.track += other.track
        self.collisions += other.collisions
        if self.psi_track is not None:
            self.psi_track += other.psi_track
        self.emitted += other.emitted
        self.absorbed += other.absorbed
        self.leaked += other.leaked
        self.scatters += other.scatters

    @property
    def total_collisions(self) -> int:
        return int(round(self.collisions.sum()))


def _batch_stats(estimates: np.ndarray, weights: np.ndarray):
    """History-weighted mean over batches and its standard error."""
    frac = weights / weights.sum()
    mean = np.tensordot(frac, estimates, axes=(0, 0))
    b = estimates.shape[0]
    dev = estimates - mean
    var = np.tensordot(frac, dev * dev, axes=(0, 0)) * b / (b - 1)
    return mean, np.sqrt(var / b)


@dataclass
class TallyGrid:
    """Batch-resolved tallies of classic fluxes and collision density on a spatial grid.

    phi = rate * track / (N V), F_hat = rate * collisions / (N V) and
    psi(mu) = rate * track_in_bin / (N V 2 pi dmu) (per steradian).
    """

    grid: SpatialGrid
    rate: float
    n_mu: int
    batches: List[ChunkTally]

    @property
    def histories(self) -> int:
        return sum(b.histories for b in self.batches)

    def _per_history(self, name: str) -> np.ndarray:
        return np.stack([getattr(b, name) / b.histories for b in self.batches])

    def _weights(self) -> np.ndarray:
        return np.array([b.histories for b in self.batches], dtype=float)

    def _field(self, name: str, scale: float):
        mean, err = _batch_stats(self._per_history(name) * scale, self._weights())
        return mean, err

    @property
    def mu_edges(self) -> np.ndarray:
        return np.linspace(-1.0, 1.0, self.n_mu + 1)

    def phi(self):
        """(mean, standard error) of the track-length scalar flux per cell (flat order)."""
        return self._field("track", self.rate / self.grid.cell_volume)

    def collision_density(self):
        return self._field("collisions", self.rate / self.grid.cell_volume)

    def psi(self):
        """(mean, error) of the angular flux per steradian, shape (n_cells, n_mu)."""
        if not self.n_mu:
            raise ValueError("run was configured without polar-angle bins")
        width = 2.0 * np.pi * (2.0 / self.n_mu)
        return self._field("psi_track", self.rate / (self.grid.cell_volume * width))

    def box_average(self, name: str):
        """Volume-averaged field over the whole tally box, with its batch error."""
        per_history = self._per_history(name)
        summed = per_history.sum(axis=1) * self.rate / (self.grid.cell_volume * self.grid.n_cells)
        if name == "psi_track":
            summed = summed / (2.0 * np.pi * (2.0 / self.n_mu))
        return _batch_stats(summed, self._weights())

    def relative_error(self, name: str = "track") -> np.ndarray:
        mean, err = self._field(name, 1.0)
        with np.errstate(divide="ignore", invalid="ignore"):
            return np.where(mean > 0.0, err / mean, np.inf)

    def balance(self) -> dict:
        total = ChunkTally(self.grid.n_cells, self.n_mu)
        for b in self.batches:
            total.merge(b)
        return {
            "histories": total.histories,
            "emitted": total.emitted,
            "absorbed": total.absorbed,
            "leaked": total.leaked,
            "scatters": total.scatters,
            "collisions": total.total_collisions,
        }

from __future__ import annotations
from abc import ABC, abstractmethod
from dataclasses import dataclass
from typing import Tuple

import numpy as np
from scipy import special, stats

from nct.utils.errors import ConfigError
from nct.utils.grid import SpatialGrid

Vec3 = Tuple[float, float, float]


def isotropic_directions(u_mu: np.ndarray, u_phi: np.ndarray) -> np.ndarray:
    mu = 2.0 * u_mu - 1.0
    rho = np.sqrt(np.maximum(1.0 - mu * mu, 0.0))
    phi = 2.0 * np.pi * u_phi
    return np.stack([rho * np.cos(phi), rho * np.sin(phi), mu], axis=-1)


class Source(ABC):
    """Isotropic particle source; ``rate`` is the total emission rate."""

    kind: str

    @property
    @abstractmethod
    def rate(self) -> float: ...

    @abstractmethod
    def sample_positions(self, u: np.ndarray) -> np.ndarray:
        """Positions (n, 3) from uniforms u (3, n)."""

    @abstractmethod
    def cell_field(self, grid: SpatialGrid) -> np.ndarray:
        """Cell-averaged emission density Q (per volume) on ``grid``, shape grid.shape."""

    @abstractmethod
    def bounds(self) -> Tuple[Vec3, Vec3]:
        """Corners of the smallest box holding every emission point."""

    @abstractmethod
    def describe(self) -> dict: ...


def _overlap(grid: SpatialGrid, lo: np.ndarray, hi: np.ndarray) -> np.ndarray:
    """Fraction of each cell inside the box [lo, hi]."""
    fractions = []
    for a in range(3):
        h = grid.spacing[a]
        left = grid.axis_centers(a) - 0.5 * h
        inside = np.clip(np.minimum(left + h, hi[a]) - np.maximum(left, lo[a]), 0.0, None)
        fractions.append(inside / h)
    return np.einsum("i,j,k->ijk", *fractions)


@dataclass(frozen=True)
class UniformSource(Source):
    q0: float
    lower: Vec3
    upper: Vec3
    kind = "uniform"

    def __post_init__(self) -> None:
        if not self.q0 > 0.0:
            raise ConfigError.at("source.q0", "emission density must be positive")
        if any(not u > l for l, u in zip(self.lower, self.upper)):
            raise ConfigError.at("source.upper", "source box must have positive extent")

    @property
    def rate(self) -> float:
        return self.q0 * float(np.prod(np.subtract(self.upper, self.lower)))

    def sample_positions(self, u):
        lo, hi = np.array(self.lower), np.array(self.upper)
        return lo + u.T * (hi - lo)

    def cell_field(self, grid):
        return self.q0 * _overlap(grid, np.array(self.lower), np.array(self.upper))

    def bounds(self):
        return self.lower, self.upper

    def describe(self):
        return {"kind": self.kind, "q0": self.q0, "lower": list(self.lower), "upper": list(self.upper)}


@dataclass(frozen=True)
class PointSource(Source):
    position: Vec3
    strength: float
    kind = "point"

    def __post_init__(self) -> None:
        if not self.strength > 0.0:
            raise ConfigError.at("source.rate", "point source rate must be positive")

    @property
    def rate(self) -> float:
        return self.strength

    def sample_positions(self, u):
        return np.broadcast_to(np.array(self.position, dtype=float), (u.shape[1], 3)).copy()

    def cell_field(self, grid):
        field = np.zeros(grid.shape)
        if grid.contains(np.array(self.position)):
            field[tuple(grid.locate(np.array([self.position]))[0])] = self.strength / grid.cell_volume
        return field

    def bounds(self):
        return self.position, self.position

    def describe(self):
        return {"kind": self.kind, "position": list(self.position), "rate": self.strength}


@dataclass(frozen=True)
class GaussianSource(Source):
    """Separable Gaussian emission truncated to the box [lower, upper]."""

    center: Vec3
    width: float
    strength: float
    lower: Vec3
    upper: Vec3
    kind = "gaussian"

    def __post_init__(self) -> None:
        if not self.width > 0.0:
            raise ConfigError.at("source.width", "gaussian width must be positive")
        if not self.strength > 0.0:
            raise ConfigError.at("source.rate", "gaussian source rate must be positive")

    @property
    def rate(self) -> float:
        return self.strength

    def _bounds(self, a: int):
        c, w = self.center[a], self.width
        return (self.lower[a] - c) / w, (self.upper[a] - c) / w

    def sample_positions(self, u):
        cols = []
        for a in range(3):
            lo, hi = self._bounds(a)
            cols.append(stats.truncnorm.ppf(u[a], lo, hi, loc=self.center[a], scale=self.width))
        return np.stack(cols, axis=1)

    def cell_field(self, grid):
        masses = []
        for a in range(3):
            lo, hi = self._bounds(a)
            h = grid.spacing[a]
            edges = np.append(grid.axis_centers(a) - 0.5 * h, grid.axis_centers(a)[-1] + 0.5 * h)
            z = np.clip((edges - self.center[a]) / self.width, lo, hi)
            masses.append(np.diff(special.ndtr(z)) / (special.ndtr(hi) - special.ndtr(lo)))
        return self.strength * np.einsum("i,j,k->ijk", *masses) / grid.cell_volume

    def bounds(self):
        return self.lower, self.upper

    def describe(self):
        return {"kind": self.kind, "center": list(self.center), "width": self.width,
                "rate": self.strength}

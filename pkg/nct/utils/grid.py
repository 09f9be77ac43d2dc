from __future__ import annotations
from dataclasses import dataclass
from typing import Tuple

import numpy as np

from nct.config import settings
from nct.utils.errors import ConfigError

Vec3 = Tuple[float, float, float]
Shape3 = Tuple[int, int, int]


@dataclass(frozen=True)
class SpatialGrid:
    """Uniform Cartesian cell grid over an axis-aligned box.

    Fields are stored as (nx, ny, nz) arrays; flat cell indices are row-major
    (C order), so ``flat = (i * ny + j) * nz + k``.
    """

    lower: Vec3
    upper: Vec3
    shape: Shape3

    def __post_init__(self) -> None:
        errors = []
        for a in range(3):
            if not self.upper[a] > self.lower[a]:
                errors.append((f"upper[{a}]", "box extent must be positive"))
            if self.shape[a] < 1:
                errors.append((f"shape[{a}]", "at least one cell per axis"))
        if not errors and self.n_cells > settings.max_cells:
            errors.append(("shape", f"{self.n_cells} cells exceed budget {settings.max_cells}"))
        if errors:
            raise ConfigError(errors)

    @classmethod
    def centered(cls, half_width: float, cells: int) -> "SpatialGrid":
        return cls((-half_width,) * 3, (half_width,) * 3, (cells,) * 3)

    @property
    def spacing(self) -> np.ndarray:
        return (np.array(self.upper) - np.array(self.lower)) / np.array(self.shape)

    @property
    def extent(self) -> np.ndarray:
        return np.array(self.upper) - np.array(self.lower)

    @property
    def cell_volume(self) -> float:
        return float(np.prod(self.spacing))

    @property
    def n_cells(self) -> int:
        return int(np.prod(self.shape))

    def axis_centers(self, axis: int) -> np.ndarray:
        h = self.spacing[axis]
        return self.lower[axis] + h * (np.arange(self.shape[axis]) + 0.5)

    def cell_centers(self) -> np.ndarray:
        """(n_cells, 3) centers in flat row-major order."""
        xs, ys, zs = np.meshgrid(*(self.axis_centers(a) for a in range(3)), indexing="ij")
        return np.stack([xs.ravel(), ys.ravel(), zs.ravel()], axis=1)

    def cell_indices(self) -> np.ndarray:
        """(n_cells, 3) integer (i, j, k) in flat row-major order."""
        ii, jj, kk = np.meshgrid(*(np.arange(n) for n in self.shape), indexing="ij")
        return np.stack([ii.ravel(), jj.ravel(), kk.ravel()], axis=1)

    def locate(self, points: np.ndarray) -> np.ndarray:
        """Integer cell indices (n, 3) of points, clipped into the grid."""
        ijk = np.floor((np.asarray(points) - np.array(self.lower)) / self.spacing).astype(np.int64)
        return np.clip(ijk, 0, np.array(self.shape) - 1)

    def flat_index(self, ijk: np.ndarray) -> np.ndarray:
        ny, nz = self.shape[1], self.shape[2]
        return (ijk[..., 0] * ny + ijk[..., 1]) * nz + ijk[..., 2]

    def contains(self, points: np.ndarray) -> np.ndarray:
        p = np.asarray(points)
        return np.all((p >= np.array(self.lower)) & (p <= np.array(self.upper)), axis=-1)

    def as_dict(self) -> dict:
        return {"lower": list(self.lower), "upper": list(self.upper), "shape": list(self.shape)}

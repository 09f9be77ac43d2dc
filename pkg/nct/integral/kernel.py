"""Transfer kernels of the isotropic-scattering integral equation on a Cartesian grid.

For a homogeneous medium the coefficient coupling a source cell to the center of
a destination cell depends only on their index offset, so a kernel is stored as
a stencil over offsets in [-(n-1), n-1] per axis and applied by convolution.
"""
from __future__ import annotations
import logging
from dataclasses import dataclass
from typing import Optional

import numpy as np
from numpy.polynomial.legendre import leggauss
from scipy import signal

from nct.config import settings
from nct.quadrature.sphere import build_product_quadrature
from nct.stats.models import CrossSectionModel
from nct.utils.errors import NumericError
from nct.utils.grid import SpatialGrid

log = logging.getLogger(__name__)

FOUR_PI = 4.0 * np.pi
NEAR_RANGE = 2  # Chebyshev offset distance integrated with the fine rule
NEAR_POINTS = 8
FAR_POINTS = 2
FACE_POINTS = 16
DEFICIT_TOL = 1e-3
DENSE_LIMIT = 20_000

KERNEL_KINDS = ("collision", "survival")


class KernelAccuracyError(NumericError):
    pass


def _cell_rule(h: np.ndarray, n: int):
    """Tensor Gauss-Legendre points (n^3, 3) and weights over a cell centered at 0."""
    x, w = leggauss(n)
    pts = np.stack(np.meshgrid(x, x, x, indexing="ij"), axis=-1).reshape(-1, 3) * (0.5 * h)
    wts = np.einsum("i,j,k->ijk", w, w, w).ravel() * np.prod(0.5 * h)
    return pts, wts


def _radial(model: CrossSectionModel, kind: str, dirs: np.ndarray, r: np.ndarray) -> np.ndarray:
    """q(Omega, r) or F(Omega, r), divided by 4 pi r^2."""
    values = model.pdf(dirs, r) if kind == "collision" else model.survival(dirs, r)
    return values / (FOUR_PI * r * r)


def _self_cell(model: CrossSectionModel, kind: str, h: np.ndarray) -> float:
    """Exact angular form of the self-cell integral.

    int_cell g(Omega, r) / (4 pi r^2) dV = (1/4 pi) int dOmega int_0^R(Omega) g dr, with the
    solid angle swept face by face: dOmega = a / r^3 dA on a face at distance a.
    """
    x, w = leggauss(FACE_POINTS)
    total = 0.0
    for axis in range(3):
        others = [a for a in range(3) if a != axis]
        u = x * 0.5 * h[others[0]]
        v = x * 0.5 * h[others[1]]
        uu, vv = np.meshgrid(u, v, indexing="ij")
        wa = np.outer(w * 0.5 * h[others[0]], w * 0.5 * h[others[1]])
        a = 0.5 * h[axis]
        for side in (1.0, -1.0):
            pts = np.zeros(uu.shape + (3,))
            pts[..., axis] = side * a
            pts[..., others[0]] = uu
            pts[..., others[1]] = vv
            r = np.linalg.norm(pts, axis=-1)
            dirs = pts / r[..., None]
            if kind == "collision":
                radial = model.cdf(dirs, r)
            else:
                g, gw = leggauss(FACE_POINTS)
                s = 0.5 * r[..., None] * (g + 1.0)
                radial = 0.5 * r * np.sum(gw * model.survival(dirs[..., None, :], s), axis=-1)
            total += float(np.sum(wa * radial * a / r**3))
    return total / FOUR_PI


def default_cutoff(model: CrossSectionModel) -> float:
    """Largest distance at which survival drops to the configured kernel floor."""
    quad = build_product_quadrature(8, 16)
    depth = np.full(len(quad), -np.log(settings.kernel_survival))
    return float(np.max(model.inverse_optical_depth(quad.nodes, depth)))


@dataclass(frozen=True, eq=False)
class KernelTable:
    grid: SpatialGrid
    stencil: np.ndarray  # (2nx-1, 2ny-1, 2nz-1), center index (nx-1, ny-1, nz-1)
    kind: str
    cutoff: float

    @property
    def center(self):
        return tuple(n - 1 for n in self.grid.shape)

    def coefficient(self, offset) -> float:
        """Coefficient for a source cell at ``offset`` cells from the destination."""
        idx = tuple(c + o for c, o in zip(self.center, offset))
        return float(self.stencil[idx])

    def apply(self, field: np.ndarray) -> np.ndarray:
        """sum_j K[j <- i] g_j for every destination cell i; ``field`` has grid.shape."""
        g = np.asarray(field, dtype=float).reshape(self.grid.shape)
        out = signal.convolve(g, self.stencil[::-1, ::-1, ::-1], mode="same")
        return np.maximum(out, 0.0)

    def row_sums(self) -> np.ndarray:
        return self.apply(np.ones(self.grid.shape))

    def as_matrix(self) -> np.ndarray:
        """Dense row-major table K[i, j] (destination i, source j) for small grids."""
        n = self.grid.n_cells
        if n > DENSE_LIMIT:
            raise ValueError(f"dense kernel of {n} cells exceeds {DENSE_LIMIT}")
        ijk = self.grid.cell_indices()
        offsets = ijk[None, :, :] - ijk[:, None, :] + np.array(self.center)
        return self.stencil[offsets[..., 0], offsets[..., 1], offsets[..., 2]]


def build_kernel(grid: SpatialGrid, model: CrossSectionModel, cutoff: Optional[float] = None,
                 kind: str = "collision") -> KernelTable:
    """Kernel stencil of q(Omega, r) / (4 pi r^2) (or the survival kernel for phi_c).

    Cells within NEAR_RANGE offsets use an 8^3 Gauss rule, farther cells 2^3; the
    singular self cell is integrated exactly in angle. The direction entering the
    kernel is the true direction between the destination center and each sub-point.
    """
    if kind not in KERNEL_KINDS:
        raise ValueError(f"kernel kind must be one of {KERNEL_KINDS}")
    cutoff = default_cutoff(model) if cutoff is None else float(cutoff)
    quad = build_product_quadrature(8, 16)
    reach = float(quad.weights @ model.cdf(quad.nodes, np.full(len(quad), cutoff))) / FOUR_PI
    if 1.0 - reach > DEFICIT_TOL:
        raise KernelAccuracyError(
            f"kernel cutoff {cutoff:g} keeps only {reach:.6f} of the collision probability"
        )

    h = grid.spacing
    shape = tuple(2 * n - 1 for n in grid.shape)
    offs = np.stack(np.meshgrid(*(np.arange(-(n - 1), n) for n in grid.shape), indexing="ij"),
                    axis=-1).reshape(-1, 3)
    nearest = np.linalg.norm(np.maximum(np.abs(offs) - 0.5, 0.0) * h, axis=1)
    cheb = np.max(np.abs(offs), axis=1)
    values = np.zeros(len(offs))

    for mask, n in ((cheb == 0, 0), ((cheb > 0) & (cheb <= NEAR_RANGE), NEAR_POINTS),
                    ((cheb > NEAR_RANGE) & (nearest <= cutoff), FAR_POINTS)):
        if not mask.any():
            continue
        if n == 0:
            values[mask] = _self_cell(model, kind, h)
            continue
        pts, wts = _cell_rule(h, n)
        centers = offs[mask] * h
        # chunk over offsets to bound memory
        step = max(1, 2_000_000 // len(pts))
        block = np.empty(mask.sum())
        for start in range(0, len(centers), step):
            p = centers[start:start + step, None, :] + pts[None, :, :]
            r = np.linalg.norm(p, axis=-1)
            block[start:start + step] = _radial(model, kind, p / r[..., None], r) @ wts
        values[mask] = block

    stencil = values.reshape(shape)
    log.info("%s kernel on %s grid: cutoff %.4g, stencil sum %.6f", kind, grid.shape, cutoff,
             stencil.sum())
    return KernelTable(grid, stencil, kind, cutoff)

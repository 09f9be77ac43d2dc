from __future__ import annotations
import logging
from dataclasses import dataclass, field
from typing import List, Optional, Sequence

import numpy as np
from numpy.polynomial.legendre import leggauss

from nct.config import settings
from nct.integral.kernel import KernelTable, build_kernel
from nct.scattering.phase import PhaseFunction
from nct.stats.models import CrossSectionModel
from nct.utils.errors import DomainError, ModelError, NumericError
from nct.utils.grid import SpatialGrid
from nct.utils.validators import normalize_directions

log = logging.getLogger(__name__)

FOUR_PI = 4.0 * np.pi
RAY_POINTS = 8


class NonConvergenceError(NumericError):
    def __init__(self, detail: str, residual: float):
        super().__init__(detail)
        self.residual = residual


@dataclass
class CollisionField:
    """Scalar collision-rate density F_hat per cell (grid.shape) with solve metadata."""

    values: np.ndarray
    iterations: int = 0
    residuals: List[float] = field(default_factory=list)

    @property
    def residual(self) -> float:
        return self.residuals[-1] if self.residuals else 0.0

    def ratios(self) -> np.ndarray:
        r = np.asarray(self.residuals)
        return r[1:] / r[:-1] if r.size > 1 else np.empty(0)


def picard_solve(kernel: KernelTable, c: float, Q: np.ndarray, tol: Optional[float] = None,
                 max_iter: Optional[int] = None) -> CollisionField:
    """Source iteration F <- K (c F + Q), started from the uncollided K Q."""
    if not 0.0 <= c < 1.0:
        raise DomainError(f"source iteration needs 0 <= c < 1, got {c!r}")
    tol = settings.picard_tol if tol is None else tol
    max_iter = settings.picard_max_iter if max_iter is None else max_iter
    Q = np.asarray(Q, dtype=float).reshape(kernel.grid.shape)
    current = kernel.apply(Q)
    result = CollisionField(current)
    if c == 0.0:
        return result
    for it in range(1, max_iter + 1):
        nxt = kernel.apply(c * current + Q)
        scale = float(np.max(np.abs(nxt))) or 1.0
        residual = float(np.max(np.abs(nxt - current))) / scale
        result.residuals.append(residual)
        current = nxt
        log.debug("picard %d: residual %.3e", it, residual)
        if residual < tol:
            result.values, result.iterations = current, it
            log.info("picard converged in %d iterations (residual %.3e)", it, residual)
            return result
    raise NonConvergenceError(
        f"source iteration did not reach {tol:g} in {max_iter} iterations", result.residual
    )


def _ray_segments(grid: SpatialGrid, direction: np.ndarray):
    """Backward rays from every cell center along -direction up to the box boundary.

    Yields per step (cell flat indices, ray ids, s_start, s_end).
    """
    lower, h = np.array(grid.lower), grid.spacing
    shape = np.array(grid.shape)
    back = -direction
    pos = grid.cell_centers()
    ijk = grid.cell_indices()
    s = np.zeros(len(pos))
    ids = np.arange(len(pos))
    while ids.size:
        face = lower + (ijk + (back > 0.0)) * h
        with np.errstate(divide="ignore", invalid="ignore"):
            t_face = np.where(back != 0.0, (face - pos) / back, np.inf)
        t_face = np.maximum(t_face, 0.0)
        axis = np.argmin(t_face, axis=1)
        t = t_face[np.arange(ids.size), axis]
        yield grid.flat_index(ijk), ids, s.copy(), s + t
        s = s + t
        pos = pos + back * t[:, None]
        ijk = ijk.copy()
        ijk[np.arange(ids.size), axis] += np.where(back[axis] > 0.0, 1, -1)
        inside = np.all((ijk >= 0) & (ijk < shape), axis=1)
        pos, ijk, s, ids = pos[inside], ijk[inside], s[inside], ids[inside]


def angular_flux_along(grid: SpatialGrid, model: CrossSectionModel, emission: np.ndarray,
                       direction) -> np.ndarray:
    """psi_c(x, Omega) = (1/4pi) int_0^inf e(x - s Omega) F(Omega, s) ds at every cell center.

    ``emission`` is the isotropic emission density c F_hat + Q (grid.shape); outside the
    box it vanishes.
    """
    d = normalize_directions(np.asarray(direction, dtype=float))
    e = np.asarray(emission, dtype=float).ravel()
    g, gw = leggauss(RAY_POINTS)
    psi = np.zeros(grid.n_cells)
    for cells, ids, a, b in _ray_segments(grid, d):
        half = 0.5 * (b - a)
        s = a[:, None] + half[:, None] * (g + 1.0)
        integral = half * (model.survival(d, s) @ gw)
        psi += np.bincount(ids, weights=e[cells] * integral, minlength=grid.n_cells)
    return psi.reshape(grid.shape) / FOUR_PI


@dataclass
class IntegralSolution:
    grid: SpatialGrid
    collision: CollisionField
    phi: np.ndarray
    source: np.ndarray
    c: float
    psi: dict = field(default_factory=dict)


def fluxes_from_collision_field(collision: CollisionField, model: CrossSectionModel, c: float,
                                Q: np.ndarray, grid: SpatialGrid,
                                directions: Sequence[Sequence[float]] = (),
                                survival_kernel: Optional[KernelTable] = None,
                                cutoff: Optional[float] = None):
    """(phi_c, {direction: psi_c}) from a converged collision density."""
    emission = c * collision.values + np.asarray(Q, dtype=float).reshape(grid.shape)
    kernel = survival_kernel or build_kernel(grid, model, cutoff, kind="survival")
    phi = kernel.apply(emission)
    psi = {tuple(float(x) for x in d): angular_flux_along(grid, model, emission, d)
           for d in directions}
    return phi, psi


def solve_integral(model: CrossSectionModel, phase: PhaseFunction, c: float, Q: np.ndarray,
                   grid: SpatialGrid, *, cutoff: Optional[float] = None,
                   tol: Optional[float] = None, max_iter: Optional[int] = None,
                   directions: Sequence[Sequence[float]] = ()) -> IntegralSolution:
    if not phase.is_isotropic:
        raise ModelError("the integral solver supports isotropic scattering only")
    kernel = build_kernel(grid, model, cutoff)
    collision = picard_solve(kernel, c, Q, tol, max_iter)
    phi, psi = fluxes_from_collision_field(collision, model, c, Q, grid, directions,
                                           cutoff=kernel.cutoff)
    return IntegralSolution(grid, collision, phi, np.asarray(Q).reshape(grid.shape), c, psi)

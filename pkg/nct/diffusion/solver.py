from __future__ import annotations
import logging
from dataclasses import dataclass, field
from typing import List, Optional, Sequence

import numpy as np
from scipy import sparse
from scipy.sparse import linalg as spla

from nct.config import settings
from nct.diffusion.tensor import DiffusionTensor
from nct.stats.models import CrossSectionModel
from nct.stats.pathlength import raw_moment
from nct.utils.errors import ConfigError, NumericError
from nct.utils.grid import SpatialGrid
from nct.utils.validators import normalize_directions

log = logging.getLogger(__name__)

BOUNDARIES = ("dirichlet", "periodic")


class DiffusionSolverError(NumericError):
    def __init__(self, detail: str, residuals: List[float]):
        super().__init__(detail)
        self.residuals = residuals


@dataclass
class DiffusionSolution:
    phi: np.ndarray  # grid.shape
    grid: SpatialGrid
    tensor: DiffusionTensor
    residual: float
    iterations: int
    residuals: List[float] = field(default_factory=list)


def _second_difference(n: int, h: float, periodic: bool) -> sparse.csr_matrix:
    """-d^2/dx^2 with zero ghost values (or wrap-around)."""
    t = sparse.diags([-np.ones(n - 1), 2.0 * np.ones(n), -np.ones(n - 1)], [-1, 0, 1], format="lil")
    if periodic and n > 1:
        t[0, n - 1] -= 1.0
        t[n - 1, 0] -= 1.0
    return t.tocsr() / (h * h)


def _centered_difference(n: int, h: float, periodic: bool) -> sparse.csr_matrix:
    c = sparse.diags([-np.ones(n - 1), np.ones(n - 1)], [-1, 1], format="lil")
    if periodic and n > 2:
        c[0, n - 1] = -1.0
        c[n - 1, 0] = 1.0
    return c.tocsr() / (2.0 * h)


def _along(axis: int, op: sparse.spmatrix, shape: Sequence[int]) -> sparse.csr_matrix:
    factors = [op if a == axis else sparse.identity(shape[a], format="csr") for a in range(3)]
    return sparse.kron(sparse.kron(factors[0], factors[1]), factors[2], format="csr")


def diffusion_operator(D: DiffusionTensor, grid: SpatialGrid, boundary: str = "dirichlet"):
    """Sparse matrix of -sum D_ab d_a d_b + removal on cell centers (row-major)."""
    periodic = boundary == "periodic"
    h, shape = grid.spacing, grid.shape
    diag = (D.Dxx, D.Dyy, D.Dzz)
    mixed = {(0, 1): D.Dxy, (0, 2): D.Dxz, (1, 2): D.Dyz}
    op = D.removal * sparse.identity(grid.n_cells, format="csr")
    for a in range(3):
        op = op + diag[a] * _along(a, _second_difference(shape[a], h[a], periodic), shape)
    for (a, b), coeff in mixed.items():
        if coeff == 0.0:
            continue
        cross = _along(a, _centered_difference(shape[a], h[a], periodic), shape) @ _along(
            b, _centered_difference(shape[b], h[b], periodic), shape
        )
        op = op - coeff * cross
    return op.tocsr()


def solve_diffusion(D: DiffusionTensor, Q: np.ndarray, grid: SpatialGrid,
                    boundary: str = "dirichlet", tol: Optional[float] = None,
                    max_iter: Optional[int] = None) -> DiffusionSolution:
    """Jacobi-preconditioned conjugate gradients on the discrete anisotropic operator."""
    if boundary not in BOUNDARIES:
        raise ConfigError.at("diffusion.boundary", f"must be one of {BOUNDARIES}")
    if boundary == "periodic" and not D.removal > 0.0:
        raise ConfigError.at("c", "a periodic diffusion problem needs absorption (c < 1)")
    D.check_positive_definite()
    tol = settings.diffusion_tol if tol is None else tol
    max_iter = settings.diffusion_max_iter if max_iter is None else max_iter

    A = diffusion_operator(D, grid, boundary)
    b = np.asarray(Q, dtype=float).ravel()
    b_norm = float(np.linalg.norm(b))
    if b_norm == 0.0:
        return DiffusionSolution(np.zeros(grid.shape), grid, D, 0.0, 0)
    precond = sparse.diags(1.0 / A.diagonal())
    residuals: List[float] = []

    def _record(xk: np.ndarray) -> None:
        residuals.append(float(np.linalg.norm(b - A @ xk)) / b_norm)
        log.debug("cg %d: residual %.3e", len(residuals), residuals[-1])

    x, info = spla.cg(A, b, rtol=tol, atol=0.0, maxiter=max_iter, M=precond, callback=_record)
    residual = float(np.linalg.norm(b - A @ x)) / b_norm
    if info != 0 or not np.isfinite(residual) or residual > 10.0 * tol:
        raise DiffusionSolverError(
            f"diffusion solve stalled at relative residual {residual:.3e} (info={info})", residuals
        )
    log.info("diffusion solve: %d cg iterations, residual %.3e", len(residuals), residual)
    return DiffusionSolution(x.reshape(grid.shape), grid, D, residual, len(residuals), residuals)


def leading_order_angular_flux(solution: DiffusionSolution, model: CrossSectionModel,
                               directions) -> np.ndarray:
    """psi_c(x, Omega) = Phi0(x) s_Omega(Omega) / (4 pi <s>), shape (n_dirs,) + grid.shape."""
    dirs = normalize_directions(np.atleast_2d(np.asarray(directions, dtype=float)))
    s1 = np.array([raw_moment(model, d, 1) for d in dirs])
    scale = s1 / (4.0 * np.pi * solution.tensor.s_mean)
    return scale[:, None, None, None] * solution.phi[None]

"""The odd vector field tau(Omega) entering the anisotropic diffusion coefficients.

tau solves tau = int P*(Omega . Omega') tau(Omega') dOmega' + S_hat, summed as a
Neumann series on the nodes of an angular quadrature.
"""
from __future__ import annotations
import logging
import threading
from dataclasses import dataclass, field
from typing import List, Optional

import numpy as np
from cachetools import LRUCache, cached

from nct.config import settings
from nct.quadrature.sphere import AngularQuadrature
from nct.scattering.phase import ScatteringKernel
from nct.stats.models import CrossSectionModel
from nct.stats.pathlength import directional_moments
from nct.utils.errors import NumericError

log = logging.getLogger(__name__)

STALL_TERMS = 50  # consecutive non-contracting terms tolerated


class SeriesDivergenceError(NumericError):
    def __init__(self, detail: str, ratios: List[float]):
        super().__init__(detail)
        self.ratios = ratios


@dataclass(frozen=True)
class TauField:
    values: np.ndarray  # (n_nodes, 3)
    quad: AngularQuadrature
    terms: int
    tail: float
    ratios: np.ndarray = field(default_factory=lambda: np.empty(0))

    def parity_defect(self) -> float:
        return float(np.max(np.abs(self.values + self.values[self.quad.antipode]), initial=0.0))


def _odd(values: np.ndarray, quad: AngularQuadrature) -> np.ndarray:
    return 0.5 * (values - values[quad.antipode])


def _operator_key(kernel: ScatteringKernel, quad: AngularQuadrature):
    return kernel.coeffs, quad.n_polar, quad.n_azimuthal


@cached(LRUCache(maxsize=8), key=_operator_key, lock=threading.Lock())
def pstar_operator(kernel: ScatteringKernel, quad: AngularQuadrature) -> np.ndarray:
    """Dense A[k, l] = P*(Omega_k . Omega_l) w_l over quadrature nodes."""
    cosines = np.clip(quad.nodes @ quad.nodes.T, -1.0, 1.0)
    return kernel(cosines) * quad.weights[None, :]


def compute_S_hat(model: Optional[CrossSectionModel], kernel: ScatteringKernel,
                  quad: AngularQuadrature, s1: Optional[np.ndarray] = None) -> np.ndarray:
    """S_hat(Omega) = -int Omega' P*(Omega . Omega') s_Omega(Omega') dOmega' at every node."""
    if s1 is None:
        s1 = directional_moments(model, quad, second=False).s1
    if kernel.is_isotropic:
        # P* = 1/4pi: the integral of an odd integrand over antipodal pairs
        flux = -(quad.weights * s1) @ quad.nodes / (4.0 * np.pi)
        return _odd(np.broadcast_to(flux, quad.nodes.shape).copy(), quad)
    s_hat = -pstar_operator(kernel, quad) @ (quad.nodes * s1[:, None])
    return _odd(s_hat, quad)


def neumann_terms(S_hat: np.ndarray, kernel: ScatteringKernel, quad: AngularQuadrature,
                  n_terms: int) -> List[np.ndarray]:
    """tau_0 = S_hat, tau_{n+1} = A tau_n, returned explicitly."""
    a = pstar_operator(kernel, quad)
    terms = [np.asarray(S_hat, dtype=float)]
    for _ in range(n_terms - 1):
        terms.append(a @ terms[-1])
    return terms


def solve_tau(S_hat: np.ndarray, kernel: ScatteringKernel, quad: AngularQuadrature,
              tol: Optional[float] = None, max_terms: Optional[int] = None) -> TauField:
    """Iterate tau <- A tau + S_hat from tau = S_hat; each update adds the next series term."""
    tol = settings.tau_tol if tol is None else tol
    max_terms = settings.tau_max_terms if max_terms is None else max_terms
    S_hat = np.asarray(S_hat, dtype=float)
    norm = float(np.max(np.abs(S_hat), initial=0.0))
    if norm < tol:
        return TauField(S_hat.copy(), quad, 1, norm)

    a = pstar_operator(kernel, quad)
    tau = S_hat.copy()
    ratios: List[float] = []
    stalled = 0
    for n in range(1, max_terms):
        updated = _odd(a @ tau + S_hat, quad)
        term = float(np.max(np.abs(updated - tau)))
        ratios.append(term / norm if norm > 0.0 else 0.0)
        tau, norm = updated, term
        log.debug("neumann term %d: |tau_n| = %.3e", n, term)
        if term < tol:
            log.info("tau converged after %d terms (last term %.3e)", n + 1, term)
            return TauField(tau, quad, n + 1, term, np.asarray(ratios))
        stalled = stalled + 1 if ratios[-1] >= 1.0 else 0
        if stalled >= STALL_TERMS:
            raise SeriesDivergenceError(
                f"Neumann series for tau is not contracting (term ratio {ratios[-1]:.6f})", ratios
            )
    raise SeriesDivergenceError(f"Neumann series for tau needs more than {max_terms} terms", ratios)

from __future__ import annotations
import logging
from dataclasses import asdict, dataclass
from typing import Optional

import numpy as np

from nct.quadrature.sphere import AngularQuadrature, build_product_quadrature
from nct.scattering.phase import ScatteringKernel
from nct.stats.models import AngularWeight, CrossSectionModel
from nct.stats.pathlength import DirectionalMoments, DivergentMomentError, directional_moments
from nct.diffusion.tau import TauField, compute_S_hat, solve_tau
from nct.utils.errors import ConfigError, ModelError

log = logging.getLogger(__name__)

FOUR_PI = 4.0 * np.pi


class AnomalousDiffusionError(DivergentMomentError):
    pass


class NotPositiveDefiniteError(ModelError):
    pass


@dataclass(frozen=True)
class DiffusionTensor:
    """Coefficients of -sum D_ab d_a d_b Phi + (1 - c)/<s> Phi = Q.

    Each off-diagonal D_ab multiplies a single mixed derivative, so the symmetric
    matrix of the operator carries D_ab / 2 off the diagonal.
    """

    Dxx: float
    Dyy: float
    Dzz: float
    Dxy: float
    Dxz: float
    Dyz: float
    s_mean: float
    s2_mean: float
    removal: float
    c: float
    tau_terms: int = 0

    def matrix(self) -> np.ndarray:
        return np.array([
            [self.Dxx, 0.5 * self.Dxy, 0.5 * self.Dxz],
            [0.5 * self.Dxy, self.Dyy, 0.5 * self.Dyz],
            [0.5 * self.Dxz, 0.5 * self.Dyz, self.Dzz],
        ])

    def check_positive_definite(self) -> None:
        eig = np.linalg.eigvalsh(self.matrix())
        if not np.all(np.isfinite(eig)) or eig[0] <= 0.0:
            raise NotPositiveDefiniteError(
                f"diffusion tensor is not positive definite (eigenvalues {eig.tolist()})"
            )

    def azimuthal_asymmetry(self) -> float:
        """Largest deviation from the azimuthally symmetric form diag(D, D, Dzz)."""
        return float(max(abs(self.Dxy), abs(self.Dxz), abs(self.Dyz), abs(self.Dxx - self.Dyy)))

    def as_dict(self) -> dict:
        return asdict(self)


def classic_diffusion_coefficient(sigma: float, c: float, mean_cosine: float = 0.0) -> float:
    """1 / (3 Sigma_t (1 - c mu0)) of exponential transport."""
    return 1.0 / (3.0 * sigma * (1.0 - c * mean_cosine))


def _coefficients(quad: AngularQuadrature, moments: DirectionalMoments,
                  tau: Optional[np.ndarray]) -> np.ndarray:
    """(3, 3) array with the diagonal and the full mixed coefficients D_ab (a != b)."""
    om, w = quad.nodes, quad.weights
    second = np.einsum("k,k,ka,kb->ab", w, moments.s2, om, om)
    cross = np.zeros((3, 3))
    if tau is not None:
        cross = np.einsum("k,k,ka,kb->ab", w, moments.s1, tau, om)
    out = second - (cross + cross.T)
    out[np.diag_indices(3)] = 0.5 * np.diag(second) - np.diag(cross)
    return out / (FOUR_PI * moments.s_mean)


def diffusion_tensor(model: CrossSectionModel, kernel: ScatteringKernel,
                     xi: Optional[AngularWeight] = None, quad: Optional[AngularQuadrature] = None,
                     *, shortcut: bool = True, tol: Optional[float] = None,
                     max_terms: Optional[int] = None) -> DiffusionTensor:
    """Six diffusion coefficients, <s>, <s^2> and the removal term.

    With an isotropic kernel tau vanishes and the tau-free form is used unless
    ``shortcut`` is False.
    """
    quad = quad or build_product_quadrature()
    try:
        moments = directional_moments(model, quad, xi)
    except DivergentMomentError as exc:
        raise AnomalousDiffusionError(
            f"diffusion limit needs finite free-path moments (anomalous diffusion): {exc.detail}"
        ) from exc

    tau: Optional[TauField] = None
    if not (shortcut and kernel.is_isotropic):
        s_hat = compute_S_hat(model, kernel, quad, s1=moments.s1)
        tau = solve_tau(s_hat, kernel, quad, tol, max_terms)
    d = _coefficients(quad, moments, tau.values if tau is not None else None)
    tensor = DiffusionTensor(
        Dxx=float(d[0, 0]), Dyy=float(d[1, 1]), Dzz=float(d[2, 2]),
        Dxy=float(d[0, 1]), Dxz=float(d[0, 2]), Dyz=float(d[1, 2]),
        s_mean=moments.s_mean, s2_mean=moments.s2_mean,
        removal=(1.0 - kernel.c) / moments.s_mean, c=kernel.c,
        tau_terms=tau.terms if tau is not None else 0,
    )
    log.info("diffusion tensor: Dxx=%.6g Dyy=%.6g Dzz=%.6g <s>=%.6g", tensor.Dxx, tensor.Dyy,
             tensor.Dzz, tensor.s_mean)
    return tensor


def resolution_check(model: CrossSectionModel, kernel: ScatteringKernel,
                     xi: Optional[AngularWeight] = None,
                     quad: Optional[AngularQuadrature] = None) -> Optional[float]:
    """Largest relative change of the coefficients when the angular resolution is halved."""
    quad = quad or build_product_quadrature()
    try:
        coarse = build_product_quadrature(quad.n_polar // 2, quad.n_azimuthal // 2)
    except ConfigError:
        return None
    fine_t = diffusion_tensor(model, kernel, xi, quad)
    coarse_t = diffusion_tensor(model, kernel, xi, coarse)
    a, b = fine_t.matrix(), coarse_t.matrix()
    change = float(np.max(np.abs(a - b)) / np.max(np.abs(a)))
    log.info("tensor change at half angular resolution: %.3e", change)
    return change

from __future__ import annotations
import logging
import threading
from dataclasses import dataclass
from typing import Callable, Optional, Union

import numpy as np
from cachetools import LRUCache, cached

from nct.config import settings
from nct.utils.errors import ConfigError, NumericError

log = logging.getLogger(__name__)


class QuadratureError(NumericError):
    def __init__(self, detail: str, node: int):
        super().__init__(f"{detail} (node {node})")
        self.node = node


@dataclass(frozen=True, eq=False)
class AngularQuadrature:
    """Product rule on the unit sphere; nodes polar-major, each with its antipode."""

    nodes: np.ndarray
    weights: np.ndarray
    n_polar: int
    n_azimuthal: int
    antipode: np.ndarray

    def __len__(self) -> int:
        return self.weights.size

    @property
    def mu(self) -> np.ndarray:
        return self.nodes[:, 2]

    def integrate(self, f: Union[Callable[[np.ndarray], np.ndarray], np.ndarray]):
        """sum_k w_k f(Omega_k); f may return scalars or vectors per node."""
        values = np.asarray(f(self.nodes) if callable(f) else f, dtype=float)
        if values.shape[:1] != self.weights.shape:
            raise ValueError(f"expected one value per node ({len(self)}), got {values.shape}")
        finite = np.isfinite(values).reshape(len(self), -1).all(axis=1)
        if not finite.all():
            raise QuadratureError("non-finite integrand", int(np.argmin(finite)))
        return np.tensordot(self.weights, values, axes=(0, 0))


def _validate(n_polar: int, n_azimuthal: int) -> None:
    errors = []
    if n_polar < 2 or n_polar % 2:
        errors.append(("quadrature.n_polar", f"must be even and >= 2, got {n_polar}"))
    if n_azimuthal < 4 or n_azimuthal % 4:
        errors.append(("quadrature.n_azimuthal", f"must be a multiple of 4 and >= 4, got {n_azimuthal}"))
    if errors:
        raise ConfigError(errors)


@cached(LRUCache(maxsize=16), lock=threading.Lock())
def _product_rule(n_polar: int, n_azimuthal: int) -> AngularQuadrature:
    x, w = np.polynomial.legendre.leggauss(n_polar)
    # exact mirror symmetry in mu
    x = 0.5 * (x - x[::-1])
    w = 0.5 * (w + w[::-1])
    phi = (np.arange(n_azimuthal) + 0.5) * 2.0 * np.pi / n_azimuthal

    mu = np.repeat(x, n_azimuthal)
    rho = np.sqrt(1.0 - mu * mu)
    ph = np.tile(phi, n_polar)
    nodes = np.stack([rho * np.cos(ph), rho * np.sin(ph), mu], axis=1)
    weights = np.repeat(w, n_azimuthal) * (2.0 * np.pi / n_azimuthal)

    i, j = np.divmod(np.arange(n_polar * n_azimuthal), n_azimuthal)
    antipode = (n_polar - 1 - i) * n_azimuthal + (j + n_azimuthal // 2) % n_azimuthal
    first = np.arange(antipode.size) < antipode
    nodes[antipode[first]] = -nodes[first]
    log.debug("built %dx%d product quadrature", n_polar, n_azimuthal)
    return AngularQuadrature(nodes, weights, n_polar, n_azimuthal, antipode)


def build_product_quadrature(n_polar: Optional[int] = None,
                             n_azimuthal: Optional[int] = None) -> AngularQuadrature:
    """Gauss-Legendre in mu = Omega_z times the midpoint (periodic trapezoid) rule in azimuth."""
    n_polar = settings.n_polar if n_polar is None else int(n_polar)
    n_azimuthal = settings.n_azimuthal if n_azimuthal is None else int(n_azimuthal)
    _validate(n_polar, n_azimuthal)
    return _product_rule(n_polar, n_azimuthal)

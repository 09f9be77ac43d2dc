from __future__ import annotations
import logging
from dataclasses import dataclass, field
from typing import Sequence, Tuple

import numpy as np
from numpy.polynomial import legendre

from nct.config import settings
from nct.utils.errors import DomainError, ModelError
from nct.utils.validators import as_direction, is_probability

log = logging.getLogger(__name__)

FOUR_PI = 4.0 * np.pi
POSITIVITY_TOL = 1e-12


class InvalidPhaseFunctionError(ModelError):
    pass


def _per_steradian(coeffs: np.ndarray) -> np.ndarray:
    n = np.arange(coeffs.size)
    return (2 * n + 1) / FOUR_PI * coeffs


@dataclass(frozen=True, eq=False)
class PhaseFunction:
    """P(mu0) = sum_n (2n+1)/(4 pi) a_n P_n(mu0), with a_0 = 1.

    Construction validates positivity on Chebyshev-Lobatto points and tabulates the
    cdf of the scattering cosine for inverse-cdf sampling.
    """

    coeffs: Tuple[float, ...]
    _mu_table: np.ndarray = field(init=False, repr=False)
    _cdf_table: np.ndarray = field(init=False, repr=False)

    def __post_init__(self) -> None:
        a = np.asarray(self.coeffs, dtype=float)
        object.__setattr__(self, "coeffs", tuple(float(x) for x in a))
        if a.ndim != 1 or a.size == 0 or not np.all(np.isfinite(a)):
            raise InvalidPhaseFunctionError("Legendre coefficients must be a finite list")
        if a[0] != 1.0:
            raise InvalidPhaseFunctionError(f"a_0 must equal 1, got {a[0]!r}")
        if a.size - 1 > settings.max_legendre_order:
            raise InvalidPhaseFunctionError(
                f"expansion order {a.size - 1} exceeds the cap {settings.max_legendre_order}"
            )
        grid = np.cos(np.linspace(0.0, np.pi, settings.positivity_points))
        low = float(np.min(legendre.legval(grid, _per_steradian(a))))
        if low < -POSITIVITY_TOL:
            raise InvalidPhaseFunctionError(f"phase function is negative (min {low:.3e} per sr)")

        # density of mu0 is 2 pi P(mu0) = sum (2n+1)/2 a_n P_n(mu0)
        cdf_series = legendre.legint(2.0 * np.pi * _per_steradian(a), lbnd=-1.0)
        mu = np.linspace(-1.0, 1.0, settings.cdf_table_size)
        cdf = np.maximum.accumulate(np.clip(legendre.legval(mu, cdf_series), 0.0, 1.0))
        cdf[0], cdf[-1] = 0.0, 1.0
        object.__setattr__(self, "_mu_table", mu)
        object.__setattr__(self, "_cdf_table", cdf)

    @classmethod
    def isotropic(cls) -> "PhaseFunction":
        return cls((1.0,))

    @property
    def order(self) -> int:
        return len(self.coeffs) - 1

    @property
    def mean_cosine(self) -> float:
        return self.coeffs[1] if len(self.coeffs) > 1 else 0.0

    @property
    def is_isotropic(self) -> bool:
        return all(a == 0.0 for a in self.coeffs[1:])

    def __call__(self, mu0):
        mu0 = np.asarray(mu0, dtype=float)
        if np.any(np.abs(mu0) > 1.0):
            raise DomainError("scattering cosine must lie in [-1, 1]")
        return legendre.legval(mu0, _per_steradian(np.asarray(self.coeffs)))

    def sample_cosine(self, u):
        return np.interp(u, self._cdf_table, self._mu_table)


@dataclass(frozen=True, eq=False)
class ScatteringKernel:
    """P*(mu0) = c P(mu0) + (1 - c) / (4 pi); coefficients a*_0 = 1, a*_n = c a_n."""

    phase: PhaseFunction
    c: float

    @property
    def coeffs(self) -> Tuple[float, ...]:
        return (1.0,) + tuple(self.c * a for a in self.phase.coeffs[1:])

    @property
    def is_isotropic(self) -> bool:
        return all(a == 0.0 for a in self.coeffs[1:])

    @property
    def mean_cosine(self) -> float:
        """c times the mean scattering cosine."""
        return self.c * self.phase.mean_cosine

    def __call__(self, mu0):
        mu0 = np.asarray(mu0, dtype=float)
        if np.any(np.abs(mu0) > 1.0):
            raise DomainError("scattering cosine must lie in [-1, 1]")
        return legendre.legval(mu0, _per_steradian(np.asarray(self.coeffs)))


def eval_phase(pf: PhaseFunction, mu0):
    return pf(mu0)


def build_pstar(pf: PhaseFunction, c: float) -> ScatteringKernel:
    if not is_probability(c):
        raise DomainError(f"scattering probability c must lie in [0, 1], got {c!r}")
    return ScatteringKernel(pf, float(c))


def sample_scatter_cosine(pf: PhaseFunction, u):
    """Scattering cosine by table lookup on the tabulated cdf of 2 pi P(mu0)."""
    return pf.sample_cosine(u)


def rotate_directions(w: np.ndarray, mu0: np.ndarray, phi: np.ndarray) -> np.ndarray:
    """Rotate unit vectors ``w`` (n, 3) by polar cosine mu0 and azimuth phi about themselves."""
    w = np.asarray(w, dtype=float)
    mu0 = np.clip(np.asarray(mu0, dtype=float), -1.0, 1.0)
    sin_t = np.sqrt(1.0 - mu0 * mu0)
    cos_p, sin_p = np.cos(phi), np.sin(phi)
    u, v, z = w[..., 0], w[..., 1], w[..., 2]
    polar = np.abs(z) > 1.0 - 1e-10
    rho = np.sqrt(np.maximum(1.0 - z * z, 0.0))
    safe = np.where(polar, 1.0, rho)
    out = np.stack(
        [
            mu0 * u + sin_t * (u * z * cos_p - v * sin_p) / safe,
            mu0 * v + sin_t * (v * z * cos_p + u * sin_p) / safe,
            mu0 * z - sin_t * rho * cos_p,
        ],
        axis=-1,
    )
    along_axis = np.stack([sin_t * cos_p, sin_t * sin_p, mu0 * np.sign(z)], axis=-1)
    out = np.where(polar[..., None], along_axis, out)
    return out / np.linalg.norm(out, axis=-1, keepdims=True)


def rotate_direction(incoming: Sequence[float], mu0: float, phi: float) -> np.ndarray:
    if abs(mu0) > 1.0:
        raise DomainError("scattering cosine must lie in [-1, 1]")
    return rotate_directions(as_direction(incoming), mu0, phi)

"""Path-length statistics: survival, free-path pdf, spectra, moments and sampling."""
from __future__ import annotations
import logging
import math
import threading
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np
from cachetools import LRUCache, cached
from scipy import integrate

from nct.config import settings
from nct.stats.laws import ConstantLaw, PathLengthLaw
from nct.stats.models import AngularWeight, CrossSectionModel
from nct.utils.errors import DomainError, ModelError, NumericError
from nct.utils.validators import as_direction, check_nonnegative_length

log = logging.getLogger(__name__)


class DivergentMomentError(ModelError):
    pass


class NonNormalizableError(ModelError):
    pass


class SingularTailError(DomainError):
    pass


class TailOverflowError(ModelError):
    pass


SINGULAR_CDF = 1.0 - 1e-14

# Optical depths used to split [0, s_max] into panels where the integrand changes scale.
_PANEL_DEPTHS = np.array([0.05, 0.25, 1.0, 2.0, 4.0, 8.0, 16.0])


def survival_probability(model: CrossSectionModel, direction, s):
    """F(Omega, s) = exp(-int_0^s Sigma_t ds')."""
    s = check_nonnegative_length(s)
    return model.survival(as_direction(direction), s)


def free_path_pdf(model: CrossSectionModel, direction, s):
    """q(Omega, s) = Sigma_t(Omega, s) F(Omega, s)."""
    s = check_nonnegative_length(s)
    return model.pdf(as_direction(direction), s)


class FreePathDistribution:
    """Conditional distance-to-collision pdf q(Omega, s) with its cdf.

    Either backed by a cross-section model (exact cdf) or by a user pdf callable
    ``pdf(direction, s)``, whose cdf is integrated numerically.
    """

    def __init__(self, pdf: Callable, cdf: Optional[Callable] = None):
        self._pdf = pdf
        self._cdf = cdf

    @classmethod
    def from_model(cls, model: CrossSectionModel) -> "FreePathDistribution":
        return cls(model.pdf, model.cdf)

    def pdf(self, direction, s):
        return self._pdf(as_direction(direction), check_nonnegative_length(s))

    def cdf(self, direction, s):
        direction = as_direction(direction)
        s = check_nonnegative_length(s)
        if self._cdf is not None:
            return self._cdf(direction, s)
        f = lambda x: float(self._pdf(direction, x))
        values = [_quad(f, 0.0, float(x))[0] for x in np.atleast_1d(s)]
        return np.reshape(np.minimum(values, 1.0), np.shape(s))


def sigma_from_pdf(q: FreePathDistribution, direction, s):
    """Sigma_t = q / (1 - int_0^s q ds')."""
    cdf = np.asarray(q.cdf(direction, s), dtype=float)
    if np.any(cdf >= SINGULAR_CDF):
        raise SingularTailError(f"distance beyond the support of q (cdf = {float(np.max(cdf))!r})")
    return q.pdf(direction, s) / (1.0 - cdf)


def _quad(f, a: float, b: float):
    """(value, converged) from QUADPACK with the configured tolerances."""
    res = integrate.quad(f, a, b, epsabs=settings.quad_epsabs, epsrel=settings.quad_epsrel,
                         limit=settings.quad_limit, full_output=1)
    # a fourth element is only returned with a warning message
    return res[0], len(res) <= 3


def _integrand(law: PathLengthLaw, order: int):
    if order == 1:
        return lambda x: float(law.survival(x))
    return lambda x: float(x ** order * law.pdf(x))


def _panels(law: PathLengthLaw, top: float) -> np.ndarray:
    marks = np.asarray(law.inverse(_PANEL_DEPTHS), dtype=float)
    marks = marks[np.isfinite(marks) & (marks > 0.0) & (marks < top)]
    return np.unique(np.concatenate([[0.0], marks, [top]]))


def _law_moment_key(law: PathLengthLaw, order: int):
    return law.key, order


@cached(LRUCache(maxsize=4096), key=_law_moment_key, lock=threading.Lock())
def law_moment(law: PathLengthLaw, order: int) -> float:
    """int_0^inf s^order q(s) ds of a 1-D law (order 1 integrates the survival function)."""
    if isinstance(law, ConstantLaw):
        return math.factorial(order) / law.rate ** order
    f = _integrand(law, order)
    finite = np.isfinite(law.upper)
    top = law.upper if finite else law.s_max
    tail = 0.0
    if not finite:
        # Divergence guard: the contribution of [L, 2L] must shrink when L doubles.
        first, ok1 = _quad(f, top, 2.0 * top)
        second, ok2 = _quad(f, 2.0 * top, 4.0 * top)
        growing = second > 0.75 * first and second > settings.quad_epsabs
        tail, ok_tail = _quad(f, top, np.inf)
        if growing or not (ok1 and ok2 and ok_tail) or not np.isfinite(tail):
            raise DivergentMomentError(
                f"moment {order} does not converge: survival decays too slowly past s_max = {top:g}"
            )
    total = tail
    edges = _panels(law, top)
    for a, b in zip(edges[:-1], edges[1:]):
        value, ok = _quad(f, a, b)
        if not ok:
            raise NumericError(f"s-quadrature of moment {order} failed on [{a:g}, {b:g}]")
        total += value
    return total


def raw_moment(model: CrossSectionModel, direction, order: int) -> float:
    """Directional moment s^m_Omega = int_0^inf s^m q(Omega, s) ds for m in {1, 2}."""
    if order not in (1, 2):
        raise DomainError(f"moment order must be 1 or 2, got {order}")
    law, m = model.law_for(as_direction(direction))
    return law_moment(law, order) / m ** order


def mean_free_path(model: CrossSectionModel, direction) -> float:
    return raw_moment(model, direction, 1)


def equilibrium_spectrum(model: CrossSectionModel, direction, s):
    """chi(Omega, s) = F(Omega, s) / s_Omega: path-length spectrum of the population."""
    try:
        mfp = mean_free_path(model, direction)
    except DivergentMomentError as exc:
        raise NonNormalizableError(f"equilibrium spectrum is not normalizable: {exc.detail}") from exc
    return survival_probability(model, direction, s) / mfp


def joint_density(model: CrossSectionModel, xi: AngularWeight, direction, s):
    """p(Omega, s) = xi(Omega) q(Omega, s)."""
    return xi(as_direction(direction)) * free_path_pdf(model, direction, s)


@dataclass(frozen=True)
class DirectionalMoments:
    """Free-path moments at every node of an angular quadrature."""

    s1: np.ndarray
    s2: Optional[np.ndarray]
    s_mean: float
    s2_mean: Optional[float]

    def check_parity(self, antipode: np.ndarray, tol: float = 1e-12) -> float:
        dev = float(np.max(np.abs(self.s1 - self.s1[antipode]) / self.s1))
        if dev > tol:
            raise ModelError(f"directional mean free path is not even (deviation {dev:.3e})")
        return dev


def _node_moments(model: CrossSectionModel, dirs: np.ndarray, order: int) -> np.ndarray:
    out = np.empty(len(dirs))
    for k, d in enumerate(dirs):
        law, m = model.law_for(d)
        out[k] = law_moment(law, order) / m ** order
    return out


def directional_moments(model: CrossSectionModel, quad, xi: Optional[AngularWeight] = None,
                        second: bool = True) -> DirectionalMoments:
    xi = xi or AngularWeight.uniform()
    w = quad.weights * xi(quad.nodes)
    s1 = _node_moments(model, quad.nodes, 1)
    s2 = _node_moments(model, quad.nodes, 2) if second else None
    return DirectionalMoments(
        s1=s1,
        s2=s2,
        s_mean=float(w @ s1),
        s2_mean=float(w @ s2) if s2 is not None else None,
    )


def ensemble_mean(model: CrossSectionModel, xi: AngularWeight, quad, order: int = 1) -> float:
    """<s^m> = sum_k w_k xi(Omega_k) s^m_Omega(Omega_k)."""
    if order not in (1, 2):
        raise DomainError(f"moment order must be 1 or 2, got {order}")
    values = _node_moments(model, quad.nodes, order)
    return float((quad.weights * xi(quad.nodes)) @ values)


def sample_free_paths(model: CrossSectionModel, dirs, u, *, strict: bool = True) -> np.ndarray:
    """Inverse-cdf free paths: optical_depth(Omega, s) = -ln(1 - u).

    With ``strict=False`` paths past the tail-extrapolation budget come back as inf.
    """
    u = np.asarray(u, dtype=float)
    if np.any(~((u > 0.0) & (u < 1.0))):
        raise DomainError("uniform variates must lie in (0, 1)")
    s = model.inverse_optical_depth(dirs, -np.log1p(-u))
    if strict and not np.all(np.isfinite(s)):
        raise TailOverflowError("free path beyond the optical-depth extrapolation budget")
    return s


def sample_free_path(model: CrossSectionModel, direction, u: float) -> float:
    return float(sample_free_paths(model, as_direction(direction), u))

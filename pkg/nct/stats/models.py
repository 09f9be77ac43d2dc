"""Direction-dependent total cross sections Sigma_t(Omega, s).

Every model is even in the direction of flight. Evaluation methods accept a
direction array of shape (..., 3) and path lengths broadcastable against its
leading shape.
"""
from __future__ import annotations
import logging
from abc import ABC, abstractmethod
from dataclasses import dataclass
from typing import Optional, Sequence, Tuple

import numpy as np
from numpy.polynomial import polynomial as poly
from scipy.interpolate import PchipInterpolator

from nct.config import settings
from nct.stats.laws import (
    ConstantLaw,
    HermiteTable,
    InvalidModelError,
    PathLengthLaw,
    TabulatedDepthLaw,
    scale_depth,
)
from nct.utils.validators import fingerprint, odd_coefficients

log = logging.getLogger(__name__)

# cos of equispaced angles: the 1001 Chebyshev-Lobatto points on [-1, 1]
VALIDATION_MU = np.cos(np.linspace(0.0, np.pi, 1001))


def _dirs(dirs) -> np.ndarray:
    d = np.asarray(dirs, dtype=float)
    if d.shape[-1:] != (3,):
        raise ValueError(f"directions must have a trailing axis of length 3, got {d.shape}")
    return d


def _broadcast_s(dirs, s) -> np.ndarray:
    s = np.asarray(s, dtype=float)
    return np.broadcast_to(s, np.broadcast_shapes(_dirs(dirs).shape[:-1], s.shape))


@dataclass(frozen=True)
class AngularModulation:
    """Even positive function of direction applied to a base path-length law.

    ``target="cross_section"`` multiplies Sigma_t by m(Omega); ``target="mean_free_path"``
    multiplies every free path by m(Omega).
    """

    form: str = "polar"
    coefficients: Tuple[float, ...] = (1.0,)
    matrix: Optional[Tuple[Tuple[float, float, float], ...]] = None
    target: str = "cross_section"

    def __post_init__(self) -> None:
        if self.target not in ("cross_section", "mean_free_path"):
            raise InvalidModelError(f"unknown modulation target {self.target!r}")
        if self.form == "polar":
            odd = odd_coefficients(self.coefficients)
            if odd:
                raise InvalidModelError(
                    f"angular modulation must be even, m(Ω) = m(-Ω); odd powers of μ: {odd}"
                )
            if np.min(poly.polyval(VALIDATION_MU, self.coefficients)) <= 0.0:
                raise InvalidModelError("angular modulation must be positive on the sphere")
        elif self.form == "quadratic":
            a = np.asarray(self.matrix, dtype=float)
            if a.shape != (3, 3) or not np.allclose(a, a.T, rtol=0.0, atol=1e-14):
                raise InvalidModelError("quadratic modulation needs a symmetric 3x3 matrix")
            if np.linalg.eigvalsh(a)[0] <= 0.0:
                raise InvalidModelError("quadratic modulation matrix must be positive definite")
        else:
            raise InvalidModelError(f"unknown modulation form {self.form!r}")

    def raw(self, dirs) -> np.ndarray:
        d = _dirs(dirs)
        if self.form == "polar":
            return poly.polyval(d[..., 2], self.coefficients)
        return np.einsum("...i,ij,...j->...", d, np.asarray(self.matrix, dtype=float), d)

    def factor(self, dirs) -> np.ndarray:
        """m(Omega) for the cross-section target, 1 / m(Omega) for the free-path target."""
        raw = self.raw(dirs)
        return raw if self.target == "cross_section" else 1.0 / raw

    def raw_range(self) -> Tuple[float, float]:
        if self.form == "polar":
            values = poly.polyval(VALIDATION_MU, self.coefficients)
            return float(values.min()), float(values.max())
        eig = np.linalg.eigvalsh(np.asarray(self.matrix, dtype=float))
        return float(eig[0]), float(eig[-1])

    def factor_range(self) -> Tuple[float, float]:
        lo, hi = self.raw_range()
        return (lo, hi) if self.target == "cross_section" else (1.0 / hi, 1.0 / lo)

    @property
    def azimuthally_symmetric(self) -> bool:
        if self.form == "polar":
            return True
        a = np.asarray(self.matrix, dtype=float)
        return a[0, 0] == a[1, 1] and a[0, 1] == 0.0 and a[0, 2] == 0.0 and a[1, 2] == 0.0

    def describe(self) -> dict:
        out = {"form": self.form, "target": self.target}
        if self.form == "polar":
            out["coefficients"] = list(self.coefficients)
        else:
            out["matrix"] = [list(r) for r in self.matrix]
        return out


class CrossSectionModel(ABC):
    kind: str = "abstract"
    direction_independent: bool = False
    azimuthally_symmetric: bool = True

    @abstractmethod
    def optical_depth(self, dirs, s) -> np.ndarray: ...

    @abstractmethod
    def sigma_t(self, dirs, s) -> np.ndarray: ...

    @abstractmethod
    def inverse_optical_depth(self, dirs, depth) -> np.ndarray:
        """Path length reaching the given depth; inf past the extrapolation budget."""

    @abstractmethod
    def law_for(self, direction) -> Tuple[PathLengthLaw, float]:
        """(law, m) such that the free path along ``direction`` is law-distributed over m."""

    @property
    @abstractmethod
    def s_max(self) -> float: ...

    @abstractmethod
    def describe(self) -> dict: ...

    @property
    def key(self) -> str:
        return fingerprint(self.describe())

    def survival(self, dirs, s) -> np.ndarray:
        return np.exp(-self.optical_depth(dirs, s))

    def cdf(self, dirs, s) -> np.ndarray:
        return -np.expm1(-self.optical_depth(dirs, s))

    def pdf(self, dirs, s) -> np.ndarray:
        with np.errstate(invalid="ignore"):
            out = self.sigma_t(dirs, s) * self.survival(dirs, s)
        return np.where(np.isfinite(out), out, 0.0)


class ConstantCrossSection(CrossSectionModel):
    kind = "constant"
    direction_independent = True

    def __init__(self, sigma: float):
        self.law = ConstantLaw(float(sigma))
        self.sigma = self.law.rate

    def optical_depth(self, dirs, s):
        return self.sigma * _broadcast_s(dirs, s)

    def sigma_t(self, dirs, s):
        return np.full_like(_broadcast_s(dirs, s), self.sigma)

    def pdf(self, dirs, s):
        return self.sigma * np.exp(-self.sigma * _broadcast_s(dirs, s))

    def inverse_optical_depth(self, dirs, depth):
        return np.asarray(depth, float) / self.sigma

    def law_for(self, direction):
        return self.law, 1.0

    @property
    def s_max(self) -> float:
        return self.law.s_max

    def describe(self) -> dict:
        return {"kind": self.kind, "sigma": self.sigma}


class FreePathPdfCrossSection(CrossSectionModel):
    """Direction-independent model defined by its free-path law (analytic or tabulated pdf)."""

    kind = "from_pdf"
    direction_independent = True

    def __init__(self, law: PathLengthLaw):
        self.law = law

    def optical_depth(self, dirs, s):
        return self.law.optical_depth(_broadcast_s(dirs, s))

    def sigma_t(self, dirs, s):
        return self.law.sigma(_broadcast_s(dirs, s))

    def survival(self, dirs, s):
        return self.law.survival(_broadcast_s(dirs, s))

    def cdf(self, dirs, s):
        return self.law.cdf(_broadcast_s(dirs, s))

    def pdf(self, dirs, s):
        return self.law.pdf(_broadcast_s(dirs, s))

    def inverse_optical_depth(self, dirs, depth):
        return self.law.inverse(_broadcast_s(dirs, depth))

    def law_for(self, direction):
        return self.law, 1.0

    @property
    def s_max(self) -> float:
        return self.law.s_max

    def describe(self) -> dict:
        return {"kind": self.kind, **self.law.describe(), "law_key": repr(self.law.key)}


class DirectionModulatedCrossSection(CrossSectionModel):
    """Base path-length law modulated by an even positive function of direction.

    ``target="cross_section"``: the product Sigma_t(Omega, s) = m(Omega) Sigma_base(s),
    so the survival along Omega is F_base(s)^m(Omega).
    ``target="mean_free_path"``: every free path along Omega is the base free path
    stretched by m(Omega), Sigma_t(Omega, s) = Sigma_base(s / m) / m.
    The two coincide for a constant base.
    """

    kind = "direction_modulated"

    def __init__(self, base: PathLengthLaw, modulation: AngularModulation):
        self.base = base
        self.modulation = modulation
        self.product = modulation.target == "cross_section"
        self.azimuthally_symmetric = modulation.azimuthally_symmetric

    def optical_depth(self, dirs, s):
        m = self.modulation.factor(dirs)
        s = np.asarray(s, float)
        if self.product:
            return m * self.base.optical_depth(_broadcast_s(dirs, s))
        return self.base.optical_depth(m * s)

    def sigma_t(self, dirs, s):
        m = self.modulation.factor(dirs)
        s = np.asarray(s, float)
        if self.product:
            return m * self.base.sigma(_broadcast_s(dirs, s))
        return m * self.base.sigma(m * s)

    def survival(self, dirs, s):
        if self.product:
            return super().survival(dirs, s)
        m = self.modulation.factor(dirs)
        return self.base.survival(m * np.asarray(s, float))

    def cdf(self, dirs, s):
        if self.product:
            return super().cdf(dirs, s)
        m = self.modulation.factor(dirs)
        return self.base.cdf(m * np.asarray(s, float))

    def pdf(self, dirs, s):
        if self.product:
            return super().pdf(dirs, s)
        m = self.modulation.factor(dirs)
        return m * self.base.pdf(m * np.asarray(s, float))

    def inverse_optical_depth(self, dirs, depth):
        m = self.modulation.factor(dirs)
        depth = np.asarray(depth, float)
        if self.product:
            return self.base.inverse(depth / m)
        return self.base.inverse(depth) / m

    def law_for(self, direction):
        m = float(self.modulation.factor(direction))
        if self.product:
            return scale_depth(self.base, m), 1.0
        return self.base, m

    @property
    def s_max(self) -> float:
        lo = self.modulation.factor_range()[0]
        if self.product:
            return scale_depth(self.base, lo).s_max
        return self.base.s_max / lo

    def describe(self) -> dict:
        return {"kind": self.kind, "base": self.base.describe(), "base_key": repr(self.base.key),
                "modulation": self.modulation.describe()}


class TabulatedCrossSection(CrossSectionModel):
    """Optical depth tabulated per polar node |mu| on a shared s-grid.

    Monotone cubic (PCHIP) in s, linear in |mu| between nodes, so the model is even
    and azimuthally symmetric by construction.
    """

    kind = "tabulated"

    def __init__(self, mu_nodes: Sequence[float], table: HermiteTable):
        mu = np.asarray(mu_nodes, dtype=float)
        if mu.ndim != 1 or mu.size != table.values.shape[1]:
            raise InvalidModelError("one optical-depth row per polar node is required")
        if mu.size > 1 and (mu[0] != 0.0 or mu[-1] != 1.0 or np.any(np.diff(mu) <= 0.0)):
            raise InvalidModelError("polar nodes must increase from |μ| = 0 to |μ| = 1")
        self.mu_nodes = mu
        self.table = table
        self.direction_independent = mu.size == 1

    @classmethod
    def from_rows(cls, mu_nodes: Sequence[float], rows: Sequence[Tuple[Sequence[float], Sequence[float]]]):
        """Rows of (s, optical depth) with independent grids, merged onto their union grid."""
        grids = [np.asarray(s, dtype=float) for s, _ in rows]
        s_all = np.unique(np.concatenate(grids))
        merged = []
        for s, (_, depth) in zip(grids, rows):
            depth = np.asarray(depth, dtype=float)
            if s.size < 2 or s.shape != depth.shape:
                raise InvalidModelError("each optical-depth row needs matching s and depth columns")
            interp = PchipInterpolator(s, depth, extrapolate=False)
            end_slope = float(interp.derivative()(s[-1]))
            values = interp(s_all)
            past = s_all > s[-1]
            values[past] = depth[-1] + end_slope * (s_all[past] - s[-1])
            merged.append(values)
        return cls(mu_nodes, HermiteTable.build(s_all, np.stack(merged, axis=1)))

    @classmethod
    def from_model(cls, model: CrossSectionModel, mu_nodes: Optional[Sequence[float]] = None,
                   points: Optional[int] = None, s_max: Optional[float] = None):
        """Resample any model onto a log-spaced grid reaching s_max."""
        mu = np.linspace(0.0, 1.0, 17) if mu_nodes is None else np.asarray(mu_nodes, float)
        n = points or settings.table_points
        top = s_max or model.s_max
        s = np.concatenate([[0.0], np.geomspace(top * 1e-6, top, n - 1)])
        dirs = np.stack([np.sqrt(1.0 - mu**2), np.zeros_like(mu), mu], axis=1)
        depth = model.optical_depth(dirs[None, :, :], s[:, None])
        log.debug("tabulated %s model on %d points up to s=%g", model.kind, n, top)
        return cls(mu, HermiteTable.build(s, depth))

    def _rows(self, dirs):
        a = np.abs(_dirs(dirs)[..., 2])
        if self.mu_nodes.size == 1:
            zero = np.zeros(a.shape, dtype=np.int64)
            return zero, zero, np.zeros(a.shape)
        lo = np.clip(np.searchsorted(self.mu_nodes, a, side="right") - 1, 0, self.mu_nodes.size - 2)
        w = (a - self.mu_nodes[lo]) / (self.mu_nodes[lo + 1] - self.mu_nodes[lo])
        return lo, lo + 1, np.clip(w, 0.0, 1.0)

    def optical_depth(self, dirs, s):
        return self.table.evaluate(s, *self._rows(dirs))[0]

    def sigma_t(self, dirs, s):
        return self.table.evaluate(s, *self._rows(dirs))[1]

    def inverse_optical_depth(self, dirs, depth):
        return self.table.invert(depth, *self._rows(dirs))

    def law_for(self, direction):
        lo, hi, w = self._rows(direction)
        return TabulatedDepthLaw(self.table, int(lo), int(hi), float(w)), 1.0

    @property
    def s_max(self) -> float:
        return self.table.s_max

    def describe(self) -> dict:
        return {"kind": self.kind, "mu_nodes": self.mu_nodes, "table": self.table.key}


@dataclass(frozen=True)
class AngularWeight:
    """Direction density xi(Omega): an even polynomial in mu, normalized on the sphere."""

    coefficients: Tuple[float, ...] = (1.0,)

    def __post_init__(self) -> None:
        odd = odd_coefficients(self.coefficients)
        if odd:
            raise InvalidModelError(f"angular weight must be even in Ω; odd powers of μ: {odd}")
        if np.min(poly.polyval(VALIDATION_MU, self.coefficients)) < 0.0:
            raise InvalidModelError("angular weight must be nonnegative")
        if not self.norm > 0.0:
            raise InvalidModelError("angular weight has zero mass")

    @classmethod
    def uniform(cls) -> "AngularWeight":
        return cls((1.0,))

    @property
    def norm(self) -> float:
        # int mu^k dOmega = 4 pi / (k + 1) for even k
        return float(sum(a * 4.0 * np.pi / (k + 1) for k, a in enumerate(self.coefficients)))

    @property
    def is_uniform(self) -> bool:
        return all(a == 0.0 for a in self.coefficients[1:])

    def __call__(self, dirs) -> np.ndarray:
        return poly.polyval(_dirs(dirs)[..., 2], self.coefficients) / self.norm

    def describe(self) -> dict:
        return {"form": "uniform" if self.is_uniform else "polar",
                "coefficients": list(self.coefficients)}

"""One-dimensional path-length laws.

A law describes the distance-to-collision along a single direction through its
optical depth tau(s) = int_0^s Sigma_t ds'. Everything else (survival, pdf, cdf,
cross section, inverse) follows from it; subclasses override whichever of those
they know in closed form.
"""
from __future__ import annotations
from abc import ABC, abstractmethod
from dataclasses import dataclass, field
from typing import Dict, Tuple

import numpy as np
from scipy import stats
from scipy.integrate import cumulative_trapezoid, trapezoid
from scipy.interpolate import PchipInterpolator

from nct.config import settings
from nct.utils.errors import ModelError
from nct.utils.validators import fingerprint


class InvalidModelError(ModelError):
    pass


class PathLengthLaw(ABC):
    upper: float = np.inf  # end of support

    @property
    @abstractmethod
    def key(self) -> tuple: ...

    @abstractmethod
    def optical_depth(self, s: np.ndarray) -> np.ndarray: ...

    @abstractmethod
    def sigma(self, s: np.ndarray) -> np.ndarray: ...

    @abstractmethod
    def inverse(self, depth: np.ndarray) -> np.ndarray:
        """s with optical_depth(s) == depth; inf where the depth cannot be reached."""

    @abstractmethod
    def describe(self) -> dict: ...

    def survival(self, s):
        return np.exp(-self.optical_depth(s))

    def pdf(self, s):
        with np.errstate(invalid="ignore"):
            out = self.sigma(s) * self.survival(s)
        return np.where(np.isfinite(out), out, 0.0)

    def cdf(self, s):
        return -np.expm1(-self.optical_depth(s))

    @property
    def s_max(self) -> float:
        """Distance where survival first drops below the configured floor."""
        return float(min(self.inverse(np.array(-np.log(settings.survival_floor))), self.upper))


@dataclass(frozen=True)
class ConstantLaw(PathLengthLaw):
    rate: float

    def __post_init__(self) -> None:
        if not (np.isfinite(self.rate) and self.rate > 0.0):
            raise InvalidModelError(f"constant cross section must be positive, got {self.rate!r}")

    @property
    def key(self) -> tuple:
        return ("constant", self.rate)

    def optical_depth(self, s):
        return self.rate * np.asarray(s, dtype=float)

    def sigma(self, s):
        return np.full_like(np.asarray(s, dtype=float), self.rate)

    def inverse(self, depth):
        return np.asarray(depth, dtype=float) / self.rate

    def pdf(self, s):
        s = np.asarray(s, dtype=float)
        return self.rate * np.exp(-self.rate * s)

    def describe(self) -> dict:
        return {"law": "constant", "sigma": self.rate}


_DISTRIBUTIONS = {
    "exponential": (("rate",), lambda p: stats.expon(scale=1.0 / p["rate"])),
    "uniform": (("length",), lambda p: stats.uniform(loc=0.0, scale=p["length"])),
    "gamma": (("shape", "scale"), lambda p: stats.gamma(a=p["shape"], scale=p["scale"])),
    "weibull": (("shape", "scale"), lambda p: stats.weibull_min(c=p["shape"], scale=p["scale"])),
    "lomax": (("shape", "scale"), lambda p: stats.lomax(c=p["shape"], scale=p["scale"])),
}

DISTRIBUTION_NAMES = tuple(_DISTRIBUTIONS)


class DistributionLaw(PathLengthLaw):
    """Free-path pdf given analytically by a scipy.stats distribution on [0, inf)."""

    def __init__(self, name: str, **params: float):
        if name not in _DISTRIBUTIONS:
            raise InvalidModelError(f"unknown free-path distribution {name!r}")
        required, factory = _DISTRIBUTIONS[name]
        missing = [p for p in required if p not in params]
        if missing or set(params) - set(required):
            raise InvalidModelError(f"{name} takes parameters {required}, got {tuple(params)}")
        bad = [p for p, v in params.items() if not (np.isfinite(v) and v > 0.0)]
        if bad:
            raise InvalidModelError(f"{name} parameters must be positive: {bad}")
        self.name = name
        self.params: Dict[str, float] = {p: float(params[p]) for p in required}
        self._dist = factory(self.params)
        self.upper = float(self._dist.support()[1])

    @property
    def key(self) -> tuple:
        return ("distribution", self.name, tuple(sorted(self.params.items())))

    def optical_depth(self, s):
        s = np.asarray(s, dtype=float)
        with np.errstate(divide="ignore"):
            return -self._dist.logsf(s)

    def sigma(self, s):
        s = np.asarray(s, dtype=float)
        with np.errstate(divide="ignore", invalid="ignore"):
            hazard = np.exp(self._dist.logpdf(s) - self._dist.logsf(s))
        return np.where(s >= self.upper, np.inf, hazard)

    def pdf(self, s):
        return self._dist.pdf(np.asarray(s, dtype=float))

    def cdf(self, s):
        return self._dist.cdf(np.asarray(s, dtype=float))

    def survival(self, s):
        return self._dist.sf(np.asarray(s, dtype=float))

    def inverse(self, depth):
        depth = np.asarray(depth, dtype=float)
        return self._dist.isf(np.exp(-depth))

    def describe(self) -> dict:
        return {"law": self.name, **self.params}


@dataclass(frozen=True, eq=False)
class TabulatedPdfLaw(PathLengthLaw):
    """Piecewise-linear pdf on a user grid; the cdf is the exact piecewise-quadratic integral."""

    s_grid: np.ndarray
    density: np.ndarray
    renormalization: float = 1.0
    _cum: np.ndarray = field(init=False, repr=False)

    @classmethod
    def from_samples(cls, s, q, *, renormalize: bool = False) -> "TabulatedPdfLaw":
        s = np.asarray(s, dtype=float)
        q = np.asarray(q, dtype=float)
        if s.ndim != 1 or s.shape != q.shape or s.size < 2:
            raise InvalidModelError("pdf table needs matching 1-D s and pdf columns (>= 2 rows)")
        if s[0] != 0.0 or np.any(np.diff(s) <= 0.0):
            raise InvalidModelError("pdf table s-grid must start at 0 and increase strictly")
        if np.any(~(q >= 0.0)):
            raise InvalidModelError("pdf table values must be nonnegative")
        mass = float(trapezoid(q, s))
        if not mass > 0.0:
            raise InvalidModelError("pdf table has zero mass")
        if abs(mass - 1.0) > settings.pdf_normalization_tol and not renormalize:
            raise InvalidModelError(
                f"pdf table integrates to {mass!r}; off by more than "
                f"{settings.pdf_normalization_tol} (set renormalize to accept)"
            )
        return cls(s, q / mass, renormalization=1.0 / mass)

    def __post_init__(self) -> None:
        object.__setattr__(self, "_cum", cumulative_trapezoid(self.density, self.s_grid, initial=0.0))
        object.__setattr__(self, "upper", float(self.s_grid[-1]))

    @property
    def key(self) -> tuple:
        return ("pdf-table", fingerprint([self.s_grid, self.density]))

    def _segment(self, s):
        k = np.clip(np.searchsorted(self.s_grid, s, side="right") - 1, 0, self.s_grid.size - 2)
        return k, s - self.s_grid[k]

    def pdf(self, s):
        s = np.asarray(s, dtype=float)
        return np.interp(s, self.s_grid, self.density, right=0.0)

    def cdf(self, s):
        s = np.asarray(s, dtype=float)
        k, d = self._segment(np.minimum(s, self.upper))
        q0 = self.density[k]
        slope = (self.density[k + 1] - q0) / (self.s_grid[k + 1] - self.s_grid[k])
        return np.minimum(self._cum[k] + q0 * d + 0.5 * slope * d * d, 1.0)

    def survival(self, s):
        return 1.0 - self.cdf(s)

    def optical_depth(self, s):
        with np.errstate(divide="ignore"):
            return -np.log1p(-self.cdf(s))

    def sigma(self, s):
        with np.errstate(divide="ignore", invalid="ignore"):
            return self.pdf(s) / self.survival(s)

    def inverse(self, depth):
        u = -np.expm1(-np.asarray(depth, dtype=float))
        k = np.clip(np.searchsorted(self._cum, u, side="right") - 1, 0, self.s_grid.size - 2)
        q0 = self.density[k]
        slope = (self.density[k + 1] - q0) / (self.s_grid[k + 1] - self.s_grid[k])
        rem = u - self._cum[k]
        # Solve q0 d + slope d^2 / 2 = rem on the linear-pdf segment.
        with np.errstate(divide="ignore", invalid="ignore"):
            quadratic = 2.0 * rem / (q0 + np.sqrt(np.maximum(q0 * q0 + 2.0 * slope * rem, 0.0)))
        d = np.where(q0 + np.abs(slope) > 0.0, quadratic, 0.0)
        return np.minimum(self.s_grid[k] + d, self.upper)

    def describe(self) -> dict:
        return {"law": "pdf_table", "points": int(self.s_grid.size),
                "renormalization": self.renormalization}


@dataclass(frozen=True, eq=False)
class HermiteTable:
    """Monotone cubic Hermite optical-depth rows sharing one s-grid.

    Rows are mixed linearly (weights per evaluation point) before the Hermite
    evaluation, which is the same as interpolating the mixed data because the
    Hermite basis is linear in nodal values and slopes. Past the last node the
    depth continues linearly with the last slope (Sigma_t held constant).
    """

    s: np.ndarray
    values: np.ndarray  # (n_s, n_rows)
    slopes: np.ndarray  # (n_s, n_rows)

    @classmethod
    def build(cls, s, depth_rows) -> "HermiteTable":
        s = np.asarray(s, dtype=float)
        values = np.asarray(depth_rows, dtype=float)
        if values.ndim == 1:
            values = values[:, None]
        if s.ndim != 1 or values.shape[0] != s.size or s.size < 2:
            raise InvalidModelError("optical-depth table rows must match the s-grid (>= 2 points)")
        if s[0] != 0.0 or np.any(np.diff(s) <= 0.0):
            raise InvalidModelError("optical-depth s-grid must start at 0 and increase strictly")
        if np.any(values[0] != 0.0):
            raise InvalidModelError("optical depth must vanish at s = 0")
        if np.any(np.diff(values, axis=0) < 0.0) or not np.all(np.isfinite(values)):
            raise InvalidModelError("optical depth must be finite and nondecreasing in s")
        slopes = np.maximum(PchipInterpolator(s, values, axis=0).derivative()(s), 0.0)
        if np.any(slopes[-1] <= 0.0):
            raise InvalidModelError("cross section at the end of the table must be positive")
        return cls(s, values, slopes)

    @property
    def key(self) -> str:
        return fingerprint([self.s, self.values])

    @property
    def s_max(self) -> float:
        return float(self.s[-1])

    def _mix(self, arr, k, lo, hi, w):
        return (1.0 - w) * arr[k, lo] + w * arr[k, hi]

    def _cell(self, s):
        k = np.clip(np.searchsorted(self.s, s, side="right") - 1, 0, self.s.size - 2)
        h = self.s[k + 1] - self.s[k]
        return k, h, np.clip((s - self.s[k]) / h, 0.0, 1.0)

    def _hermite(self, k, h, t, lo, hi, w):
        y0, y1 = self._mix(self.values, k, lo, hi, w), self._mix(self.values, k + 1, lo, hi, w)
        m0, m1 = self._mix(self.slopes, k, lo, hi, w), self._mix(self.slopes, k + 1, lo, hi, w)
        t2, t3 = t * t, t * t * t
        value = (2 * t3 - 3 * t2 + 1) * y0 + (t3 - 2 * t2 + t) * h * m0 \
            + (3 * t2 - 2 * t3) * y1 + (t3 - t2) * h * m1
        slope = (6 * t2 - 6 * t) / h * (y0 - y1) + (3 * t2 - 4 * t + 1) * m0 + (3 * t2 - 2 * t) * m1
        return value, slope

    def evaluate(self, s, lo, hi, w) -> Tuple[np.ndarray, np.ndarray]:
        """(optical depth, Sigma_t) at s for row mixtures (lo, hi, w)."""
        s, lo, hi, w = np.broadcast_arrays(np.asarray(s, float), lo, hi, w)
        shape = s.shape
        s, lo, hi, w = (a.ravel() for a in (s, lo, hi, w))
        k, h, t = self._cell(s)
        value, slope = self._hermite(k, h, t, lo, hi, w)
        end = self.s.size - 1
        y_end, m_end = self._mix(self.values, end, lo, hi, w), self._mix(self.slopes, end, lo, hi, w)
        beyond = s > self.s[-1]
        value = np.where(beyond, y_end + m_end * (s - self.s[-1]), value)
        slope = np.where(beyond, m_end, np.maximum(slope, 0.0))
        return value.reshape(shape), slope.reshape(shape)

    def invert(self, depth, lo, hi, w, *, tol: float = 1e-12) -> np.ndarray:
        """Bracket the grid cell by bisection on nodes, then safeguarded Newton inside it."""
        depth, lo, hi, w = np.broadcast_arrays(np.asarray(depth, float), lo, hi, w)
        shape = depth.shape
        depth, lo, hi, w = (a.ravel() for a in (depth, lo, hi, w))
        end = self.s.size - 1
        y_end, m_end = self._mix(self.values, end, lo, hi, w), self._mix(self.slopes, end, lo, hi, w)
        out = np.empty_like(depth)

        beyond = depth > y_end
        excess = depth[beyond] - y_end[beyond]
        extrapolated = self.s[-1] + excess / m_end[beyond]
        out[beyond] = np.where(excess <= settings.tail_extrapolation_depth, extrapolated, np.inf)

        inside = ~beyond
        d, l_, h_, w_ = depth[inside], lo[inside], hi[inside], w[inside]
        k_lo = np.zeros(d.size, dtype=np.int64)
        k_hi = np.full(d.size, end, dtype=np.int64)
        while np.any(k_hi - k_lo > 1):
            mid = (k_lo + k_hi) // 2
            go = self._mix(self.values, mid, l_, h_, w_) <= d
            k_lo = np.where(go, mid, k_lo)
            k_hi = np.where(go, k_hi, mid)
        k = k_lo
        h = self.s[k + 1] - self.s[k]
        y0, y1 = self._mix(self.values, k, l_, h_, w_), self._mix(self.values, k + 1, l_, h_, w_)
        a, b = np.zeros_like(d), np.ones_like(d)
        with np.errstate(divide="ignore", invalid="ignore"):
            t = np.where(y1 > y0, (d - y0) / (y1 - y0), 0.0)
        t = np.clip(t, 0.0, 1.0)
        scale = tol * np.maximum(1.0, np.abs(d))
        for _ in range(60):
            value, slope = self._hermite(k, h, t, l_, h_, w_)
            f = value - d
            if np.all(np.abs(f) <= scale):
                break
            b = np.where(f > 0.0, t, b)
            a = np.where(f > 0.0, a, t)
            dfdt = slope * h
            with np.errstate(divide="ignore", invalid="ignore"):
                newton = t - f / dfdt
            ok = (dfdt > 0.0) & (newton > a) & (newton < b)
            t = np.where(np.abs(f) <= scale, t, np.where(ok, newton, 0.5 * (a + b)))
        out[inside] = self.s[k] + t * h
        return out.reshape(shape)


@dataclass(frozen=True, eq=False)
class TabulatedDepthLaw(PathLengthLaw):
    """One (possibly mixed) row of a HermiteTable viewed as a 1-D law."""

    table: HermiteTable
    lo: int = 0
    hi: int = 0
    weight: float = 0.0

    @property
    def key(self) -> tuple:
        return ("depth-table", self.table.key, self.lo, self.hi, round(self.weight, 15))

    def optical_depth(self, s):
        return self.table.evaluate(s, self.lo, self.hi, self.weight)[0]

    def sigma(self, s):
        return self.table.evaluate(s, self.lo, self.hi, self.weight)[1]

    def inverse(self, depth):
        return self.table.invert(depth, self.lo, self.hi, self.weight)

    @property
    def s_max(self) -> float:
        return self.table.s_max

    def describe(self) -> dict:
        return {"law": "depth_table", "points": int(self.table.s.size)}


class ScaledDepthLaw(PathLengthLaw):
    """Base law with its cross section multiplied by a constant: tau(s) = m tau_base(s)."""

    def __init__(self, base: PathLengthLaw, factor: float):
        if not (np.isfinite(factor) and factor > 0.0):
            raise InvalidModelError(f"cross-section factor must be positive, got {factor!r}")
        self.base = base
        self.factor = float(factor)
        self.upper = base.upper

    @property
    def key(self) -> tuple:
        return ("scaled-depth", self.base.key, self.factor)

    def optical_depth(self, s):
        return self.factor * self.base.optical_depth(s)

    def sigma(self, s):
        return self.factor * self.base.sigma(s)

    def inverse(self, depth):
        return self.base.inverse(np.asarray(depth, dtype=float) / self.factor)

    def describe(self) -> dict:
        return {"law": "scaled_depth", "factor": self.factor, "base": self.base.describe()}


def scale_depth(law: PathLengthLaw, factor: float) -> PathLengthLaw:
    if factor == 1.0:
        return law
    if isinstance(law, ConstantLaw):
        return ConstantLaw(law.rate * factor)
    return ScaledDepthLaw(law, factor)


def make_law(params: dict) -> PathLengthLaw:
    """Law from a plain mapping: {"law": name, ...parameters} (as stored in run documents)."""
    params = dict(params)
    name = params.pop("law")
    if name == "constant":
        return ConstantLaw(float(params["sigma"]))
    if name == "pdf_table":
        return TabulatedPdfLaw.from_samples(params["s"], params["pdf"],
                                            renormalize=bool(params.get("renormalize", False)))
    return DistributionLaw(name, **{k: float(v) for k, v in params.items()})

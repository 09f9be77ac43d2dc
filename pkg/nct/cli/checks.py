"""Classical-transport identities that a constant cross section must reproduce."""
from __future__ import annotations
import logging
from dataclasses import asdict, dataclass, field
from typing import List, Tuple

import numpy as np
from numpy.polynomial.legendre import leggauss

from nct.cli.document import RunDocument, build_model, build_phase, build_quadrature, build_xi
from nct.diffusion.tau import compute_S_hat, solve_tau
from nct.diffusion.tensor import classic_diffusion_coefficient, diffusion_tensor
from nct.integral.kernel import build_kernel
from nct.integral.picard import fluxes_from_collision_field, picard_solve
from nct.scattering.phase import build_pstar
from nct.stats.models import ConstantCrossSection
from nct.stats.pathlength import ensemble_mean, free_path_pdf
from nct.utils.errors import ConfigError
from nct.utils.grid import SpatialGrid

log = logging.getLogger(__name__)

KERNEL_CELLS = 9
KERNEL_SPACING = 0.25  # in mean free paths
KERNEL_OFFSETS = ((1, 0, 0), (1, 1, 0), (2, 1, 1), (4, 0, 0))
DEEP_CELLS = 15  # one mean free path per cell


@dataclass
class CheckResult:
    name: str
    passed: bool
    deviation: float
    tolerance: float
    detail: str = ""


@dataclass
class CheckReport:
    sigma: float
    c: float
    mean_cosine: float
    results: List[CheckResult] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return all(r.passed for r in self.results)

    def add(self, name: str, deviation: float, tolerance: float, detail: str = "") -> None:
        ok = bool(np.isfinite(deviation) and deviation <= tolerance)
        self.results.append(CheckResult(name, ok, float(deviation), tolerance, detail))
        log.info("%-28s %s  deviation %.3e (tol %.1e)", name, "PASS" if ok else "FAIL",
                 deviation, tolerance)

    def as_dict(self) -> dict:
        return {
            "sigma": self.sigma,
            "c": self.c,
            "mean_cosine": self.mean_cosine,
            "passed": self.passed,
            "checks": [{**asdict(r), "status": "PASS" if r.passed else "FAIL"}
                       for r in self.results],
        }


def _exact_kernel(sigma: float, grid: SpatialGrid, offset: Tuple[int, int, int]) -> float:
    """12^3 Gauss integral of sigma e^{-sigma r} / (4 pi r^2) over a non-self cell."""
    x, w = leggauss(12)
    h = grid.spacing
    axes = [o * h[a] + 0.5 * h[a] * x for a, o in enumerate(offset)]
    pts = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1)
    r = np.linalg.norm(pts, axis=-1)
    wts = np.einsum("i,j,k->ijk", w, w, w) * np.prod(0.5 * h)
    return float(np.sum(wts * sigma * np.exp(-sigma * r) / (4.0 * np.pi * r * r)))


def _relative(a: np.ndarray, b: np.ndarray) -> float:
    return float(np.max(np.abs(a - b)) / max(float(np.max(np.abs(b))), 1e-300))


def reduce_check(doc: RunDocument) -> CheckReport:
    """Run every classical identity on the document's constant cross section."""
    if doc.model.kind != "constant":
        raise ConfigError.at("model.kind", "reduce-check needs a constant cross section")
    model: ConstantCrossSection = build_model(doc)
    phase = build_phase(doc)
    quad = build_quadrature(doc)
    xi = build_xi(doc)
    sigma, c, mu0 = model.sigma, doc.c, phase.mean_cosine
    report = CheckReport(sigma, c, mu0)

    def exponential_pdf() -> None:
        s = np.linspace(0.0, 20.0 / sigma, 201)
        exact = sigma * np.exp(-sigma * s)
        dev = max(_relative(free_path_pdf(model, d, s), exact) for d in quad.nodes[::17])
        report.add("exponential free-path pdf", dev, 1e-12)

    def moments() -> None:
        s1 = ensemble_mean(model, xi, quad, 1)
        s2 = ensemble_mean(model, xi, quad, 2)
        report.add("mean free path", abs(s1 - 1.0 / sigma) * sigma, 1e-10,
                   f"<s> = {s1!r}, 1/sigma = {1.0 / sigma!r}")
        report.add("second moment", abs(s2 - 2.0 / sigma**2) * sigma**2 / 2.0, 1e-10,
                   f"<s^2> = {s2!r}, 2/sigma^2 = {2.0 / sigma**2!r}")

    grid = SpatialGrid.centered(0.5 * KERNEL_CELLS * KERNEL_SPACING / sigma, KERNEL_CELLS)
    kernel = build_kernel(grid, model)

    def kernel_form() -> None:
        dev = max(abs(kernel.coefficient(o) / _exact_kernel(sigma, grid, o) - 1.0)
                  for o in KERNEL_OFFSETS)
        report.add("collision kernel form", dev, 1e-3)

    def integral_forms() -> None:
        # the integral solver needs c < 1 and isotropic scattering
        c_int = c if c < 1.0 else 0.5
        Q = np.ones(grid.shape)
        survival = build_kernel(grid, model, kernel.cutoff, kind="survival")
        collision = picard_solve(kernel, c_int, Q)
        phi, _ = fluxes_from_collision_field(collision, model, c_int, Q, grid,
                                             survival_kernel=survival)
        report.add("collision density = sigma phi", _relative(collision.values, sigma * phi), 1e-2,
                   f"c = {c_int}")

    def infinite_medium() -> None:
        # uniform unit source deep inside a box: every emitted particle collides 1/(1 - c) times
        c_inf = min(c, 0.5)
        deep = SpatialGrid.centered(0.5 * DEEP_CELLS / sigma, DEEP_CELLS)
        collision = picard_solve(build_kernel(deep, model), c_inf, np.ones(deep.shape))
        mid = DEEP_CELLS // 2
        center = float(collision.values[mid, mid, mid])
        report.add("infinite-medium collision density", abs(center * (1.0 - c_inf) - 1.0), 1e-2,
                   f"c = {c_inf}, F = {center!r}, Q/(1 - c) = {1.0 / (1.0 - c_inf)!r}")

    def tau_closed_form() -> None:
        kern = build_pstar(phase, c)
        tau = solve_tau(compute_S_hat(model, kern, quad), kern, quad)
        g = c * mu0
        exact = -(g / (1.0 - g)) * quad.nodes / sigma
        report.add("tau closed form", float(np.max(np.abs(tau.values - exact))), 1e-8,
                   f"{tau.terms} Neumann terms")

    def diffusion_coefficient() -> None:
        tensor = diffusion_tensor(model, build_pstar(phase, c), xi, quad, shortcut=False)
        expected = classic_diffusion_coefficient(sigma, c, mu0)
        d = tensor.matrix()
        dev = max(float(np.max(np.abs(np.diag(d) - expected))), tensor.azimuthal_asymmetry())
        report.add("diffusion coefficient", dev, 1e-8,
                   f"D = {tensor.Dxx!r}, 1/(3 sigma (1 - c mu0)) = {expected!r}")

    for run in (exponential_pdf, moments, kernel_form, integral_forms, infinite_medium,
                tau_closed_form, diffusion_coefficient):
        run()
    log.info("reduce-check: %d/%d passed", sum(r.passed for r in report.results),
             len(report.results))
    return report

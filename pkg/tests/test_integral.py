from __future__ import annotations

import numpy as np
import pytest

from nct.integral.kernel import KernelAccuracyError, build_kernel, default_cutoff
from nct.integral.picard import (
    NonConvergenceError,
    angular_flux_along,
    fluxes_from_collision_field,
    picard_solve,
    solve_integral,
)
from nct.scattering.phase import PhaseFunction
from nct.stats.laws import DistributionLaw
from nct.stats.models import ConstantCrossSection, FreePathPdfCrossSection
from nct.stats.pathlength import mean_free_path
from nct.transport.montecarlo import RunConfig, run_simulation
from nct.transport.source import GaussianSource, PointSource
from nct.utils.errors import DomainError, ModelError
from nct.utils.grid import SpatialGrid

from tests.conftest import one_plus_mu2

MODEL = ConstantCrossSection(1.0)


@pytest.fixture(scope="module")
def small_grid():
    return SpatialGrid.centered(2.5, 5)


@pytest.fixture(scope="module")
def kernel(small_grid):
    return build_kernel(small_grid, MODEL)


class TestKernel:
    def test_default_cutoff(self):
        assert default_cutoff(ConstantCrossSection(2.0)) == pytest.approx(np.log(1e10) / 2.0)

    def test_short_cutoff_rejected(self, small_grid):
        with pytest.raises(KernelAccuracyError):
            build_kernel(small_grid, MODEL, cutoff=0.5)

    def test_stencil_is_symmetric(self, kernel):
        np.testing.assert_allclose(kernel.stencil, kernel.stencil[::-1, ::-1, ::-1], rtol=1e-12)

    def test_row_sums_below_one(self):
        grid = SpatialGrid.centered(3.75, 15)
        sums = build_kernel(grid, MODEL).row_sums()
        assert np.all(sums <= 1.0 + 1e-6)
        assert sums[7, 7, 7] > 0.95
        assert sums[0, 0, 0] < sums[7, 7, 7]

    def test_dense_matrix_matches_convolution(self, kernel, small_grid):
        g = np.random.default_rng(5).random(small_grid.shape)
        dense = kernel.as_matrix() @ g.ravel()
        np.testing.assert_allclose(kernel.apply(g).ravel(), dense, rtol=1e-12, atol=1e-15)

    def test_collision_kernel_is_sigma_times_survival_kernel(self, small_grid):
        model = ConstantCrossSection(1.7)
        collision = build_kernel(small_grid, model)
        survival = build_kernel(small_grid, model, collision.cutoff, kind="survival")
        np.testing.assert_allclose(collision.stencil, 1.7 * survival.stencil, rtol=1e-10)

    def test_far_coefficient(self, kernel):
        # unit cell centered three mean free paths away, integrated with a 12-point rule
        x, w = np.polynomial.legendre.leggauss(12)
        pts = np.stack(np.meshgrid(3.0 + 0.5 * x, 0.5 * x, 0.5 * x, indexing="ij"), axis=-1)
        r = np.linalg.norm(pts, axis=-1)
        weights = np.einsum("i,j,k->ijk", w, w, w) / 8.0
        exact = float(np.sum(weights * np.exp(-r) / (4.0 * np.pi * r * r)))
        assert kernel.coefficient((3, 0, 0)) == pytest.approx(exact, rel=0.01)

    def test_anisotropic_model_kernel(self, small_grid):
        stretched = build_kernel(small_grid, one_plus_mu2())
        # longer free paths along z carry more collisions to z-neighbours
        assert stretched.coefficient((0, 0, 2)) > stretched.coefficient((2, 0, 0))


class TestPicard:
    def test_pure_absorber_returns_uncollided(self, kernel, small_grid):
        Q = np.ones(small_grid.shape)
        field = picard_solve(kernel, 0.0, Q)
        np.testing.assert_array_equal(field.values, kernel.apply(Q))
        assert field.iterations == 0

    def test_contraction_ratio(self, kernel, small_grid):
        field = picard_solve(kernel, 0.5, np.ones(small_grid.shape))
        assert np.all(field.ratios() <= 0.52)
        assert field.residual < 1e-10

    def test_fixed_point(self, kernel, small_grid):
        Q = np.ones(small_grid.shape)
        field = picard_solve(kernel, 0.8, Q)
        np.testing.assert_allclose(field.values, kernel.apply(0.8 * field.values + Q), rtol=1e-9)

    @pytest.mark.parametrize("c", [1.0, -0.2])
    def test_scattering_probability_bound(self, kernel, small_grid, c):
        with pytest.raises(DomainError):
            picard_solve(kernel, c, np.ones(small_grid.shape))

    def test_non_convergence(self, kernel, small_grid):
        with pytest.raises(NonConvergenceError) as exc:
            picard_solve(kernel, 0.9, np.ones(small_grid.shape), tol=1e-14, max_iter=2)
        assert exc.value.residual > 0.0


class TestIntegralSolution:
    def test_classic_identity(self, small_grid):
        solution = solve_integral(MODEL, PhaseFunction.isotropic(), 0.6, np.ones(small_grid.shape),
                                  small_grid)
        np.testing.assert_allclose(solution.collision.values, solution.phi, rtol=1e-8)

    def test_flux_is_collision_density_over_sigma(self, small_grid):
        model = ConstantCrossSection(2.0)
        kernel = build_kernel(small_grid, model)
        Q = np.ones(small_grid.shape)
        collision = picard_solve(kernel, 0.5, Q)
        phi, psi = fluxes_from_collision_field(collision, model, 0.5, Q, small_grid,
                                               cutoff=kernel.cutoff)
        np.testing.assert_allclose(phi, collision.values / 2.0, rtol=1e-8)
        assert psi == {}

    def test_anisotropic_phase_rejected(self, small_grid):
        with pytest.raises(ModelError):
            solve_integral(MODEL, PhaseFunction((1.0, 0.2)), 0.5, np.ones(small_grid.shape),
                           small_grid)

    def test_angular_flux_of_uncollided_slab(self, small_grid):
        Q = np.ones(small_grid.shape)
        psi = angular_flux_along(small_grid, MODEL, Q, (0.0, 0.0, 1.0))
        z = small_grid.axis_centers(2)
        depth = z - small_grid.lower[2]
        expected = (1.0 - np.exp(-depth)) / (4.0 * np.pi)
        np.testing.assert_allclose(psi, np.broadcast_to(expected, small_grid.shape), rtol=1e-10)

    def test_requested_directions(self, small_grid):
        solution = solve_integral(MODEL, PhaseFunction.isotropic(), 0.3, np.ones(small_grid.shape),
                                  small_grid, directions=[(0.0, 0.0, 1.0), (0.0, 0.0, -1.0)])
        up, down = solution.psi[(0.0, 0.0, 1.0)], solution.psi[(0.0, 0.0, -1.0)]
        np.testing.assert_allclose(up, down[:, :, ::-1], rtol=1e-10)

    def test_heavy_tail_solves(self, small_grid):
        heavy = FreePathPdfCrossSection(DistributionLaw("lomax", shape=2.0, scale=1.0))
        solution = solve_integral(heavy, PhaseFunction.isotropic(), 0.5,
                                  np.ones(small_grid.shape), small_grid)
        assert np.all(np.isfinite(solution.phi)) and solution.phi.min() > 0.0


class TestIntegralInvariants:
    def test_infinite_medium_collision_density(self):
        grid = SpatialGrid.centered(7.5, 15)
        solution = solve_integral(MODEL, PhaseFunction.isotropic(), 0.5, np.ones(grid.shape), grid)
        center = solution.collision.values[6:9, 6:9, 6:9]
        np.testing.assert_allclose(center, 2.0, rtol=0.01)

    def test_uncollided_point_source(self):
        grid = SpatialGrid.centered(2.625, 21)
        Q = PointSource((0.0, 0.0, 0.0), 1.0).cell_field(grid)
        solution = solve_integral(MODEL, PhaseFunction.isotropic(), 0.0, Q, grid)
        r = np.linalg.norm(grid.cell_centers(), axis=1).reshape(grid.shape)
        shell = (r >= 1.5) & (r <= 2.5)
        expected = np.exp(-r[shell]) / (4.0 * np.pi * r[shell] ** 2)
        np.testing.assert_allclose(solution.phi[shell], expected, rtol=0.02)

    def test_angular_flux_follows_mean_free_path(self):
        model = one_plus_mu2()
        grid = SpatialGrid.centered(10.0, 9)
        up, side = (0.0, 0.0, 1.0), (1.0, 0.0, 0.0)
        solution = solve_integral(model, PhaseFunction.isotropic(), 0.3, np.ones(grid.shape), grid,
                                  directions=[up, side])
        ratio = solution.psi[up][4, 4, 4] / solution.psi[side][4, 4, 4]
        expected = mean_free_path(model, up) / mean_free_path(model, side)
        assert ratio == pytest.approx(expected, rel=0.03)

    def test_grid_convergence_order(self):
        totals = []
        for cells in (6, 12, 24):
            grid = SpatialGrid.centered(1.5, cells)
            solution = solve_integral(MODEL, PhaseFunction.isotropic(), 0.5, np.ones(grid.shape),
                                      grid)
            totals.append(float(solution.collision.values.sum()) * grid.cell_volume)
        order = np.log2(abs(totals[0] - totals[1]) / abs(totals[1] - totals[2]))
        assert order >= 0.8


@pytest.mark.slow
def test_integral_solver_agrees_with_monte_carlo():
    grid = SpatialGrid.centered(2.75, 11)
    source = GaussianSource((0.0, 0.0, 0.0), 1.0, 1.0, grid.lower, grid.upper)
    solution = solve_integral(MODEL, PhaseFunction.isotropic(), 0.5, source.cell_field(grid), grid)
    assert np.all(solution.collision.ratios() <= 0.52)

    cfg = RunConfig(MODEL, PhaseFunction.isotropic(), 0.5, source, grid, 400_000, seed=3,
                    boundary="vacuum")
    mean, err = run_simulation(cfg).collision_density()
    mean, err = mean.reshape(grid.shape), err.reshape(grid.shape)
    reference = solution.collision.values
    inner = np.zeros(grid.shape, dtype=bool)
    inner[1:-1, 1:-1, 1:-1] = True
    inner &= reference >= 0.1 * reference.max()
    deviation = np.abs(mean - reference)[inner]
    assert np.all(deviation <= 3.0 * err[inner] + 0.02 * reference[inner])

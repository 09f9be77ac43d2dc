from __future__ import annotations

import dataclasses

import numpy as np
import pytest
from scipy import stats

from nct.config import settings
from nct.scattering.phase import PhaseFunction
from nct.stats.laws import DistributionLaw
from nct.stats.models import ConstantCrossSection, FreePathPdfCrossSection
from nct.stats.pathlength import sample_free_paths
from nct.transport.montecarlo import RunConfig, run_history, run_simulation
from nct.transport.rng import HistoryStreams
from nct.transport.source import GaussianSource, PointSource, UniformSource, isotropic_directions
from nct.utils.errors import ConfigError
from nct.utils.grid import SpatialGrid

from tests.conftest import one_plus_mu2


def _periodic(model, c, histories, *, n_mu=0, seed=1, cells=4, half=2.0, phase=None):
    grid = SpatialGrid.centered(half, cells)
    return RunConfig(
        model=model,
        phase=phase or PhaseFunction.isotropic(),
        c=c,
        source=UniformSource(1.0, grid.lower, grid.upper),
        grid=grid,
        histories=histories,
        seed=seed,
        n_mu=n_mu,
    )


def _exponential_flights(grid, sigma, c, histories, seed, batches=20):
    """Collision density of a unit point source at the origin from plain exponential flights."""
    rng = np.random.default_rng(seed)
    edges = [np.linspace(lo, hi, n + 1) for lo, hi, n in zip(grid.lower, grid.upper, grid.shape)]
    per_batch = []
    for ids in np.array_split(np.arange(histories), batches):
        pos = np.zeros((ids.size, 3))
        counts = np.zeros(grid.shape)
        while len(pos):
            dirs = isotropic_directions(rng.random(len(pos)), rng.random(len(pos)))
            pos = pos - np.log(rng.random(len(pos)))[:, None] / sigma * dirs
            pos = pos[grid.contains(pos)]
            counts += np.histogramdd(pos, bins=edges)[0]
            pos = pos[rng.random(len(pos)) < c]
        per_batch.append(counts / (ids.size * grid.cell_volume))
    per_batch = np.array(per_batch)
    return per_batch.mean(axis=0), per_batch.std(axis=0, ddof=1) / np.sqrt(batches)

class TestStreams:
    def test_draws_depend_only_on_history(self):
        a = HistoryStreams(9, np.arange(10))
        b = HistoryStreams(9, np.array([3, 7]))
        da, db = a.draws(4), b.draws(4)
        np.testing.assert_array_equal(da[:, [3, 7]], db)
        assert np.all((da > 0.0) & (da < 1.0))

    def test_seed_changes_stream(self):
        a = HistoryStreams(1, np.arange(5)).draw()
        b = HistoryStreams(2, np.arange(5)).draw()
        assert not np.any(a == b)


class TestRunConfig:
    def test_scattering_probability_bound(self):
        with pytest.raises(ConfigError) as exc:
            _periodic(ConstantCrossSection(1.0), 1.0, 100)
        assert exc.value.errors[0][0] == "c"

    def test_too_few_batches(self):
        grid = SpatialGrid.centered(1.0, 2)
        with pytest.raises(ConfigError) as exc:
            RunConfig(ConstantCrossSection(1.0), PhaseFunction.isotropic(), 0.5,
                      UniformSource(1.0, grid.lower, grid.upper), grid, 1000, batches=5)
        assert ("mc.batches" in [path for path, _ in exc.value.errors])

    def test_gaussian_source_needs_width(self):
        with pytest.raises(ConfigError):
            GaussianSource((0.0, 0.0, 0.0), 0.0, 1.0, (-1.0,) * 3, (1.0,) * 3)

    def test_source_must_lie_in_the_box(self):
        grid = SpatialGrid.centered(1.0, 2)
        wide = GaussianSource((0.0, 0.0, 0.0), 1.0, 1.0, (-2.0,) * 3, (2.0,) * 3)
        for source in (wide, PointSource((1.5, 0.0, 0.0), 1.0)):
            with pytest.raises(ConfigError) as exc:
                RunConfig(ConstantCrossSection(1.0), PhaseFunction.isotropic(), 0.5, source, grid,
                          1000, boundary="vacuum")
            assert [path for path, _ in exc.value.errors] == ["source"]


class TestSimulation:
    def test_reproducible_across_threads(self):
        cfg = _periodic(ConstantCrossSection(1.0), 0.5, 2_000)
        one = run_simulation(cfg, threads=1)
        many = run_simulation(cfg, threads=3)
        np.testing.assert_array_equal(one.phi()[0], many.phi()[0])
        np.testing.assert_array_equal(one.collision_density()[0], many.collision_density()[0])

    def test_independent_of_chunking(self, monkeypatch):
        cfg = _periodic(ConstantCrossSection(1.0), 0.5, 2_000)
        reference = run_simulation(cfg)
        monkeypatch.setattr(settings, "mc_chunk_size", 7)
        chunked = run_simulation(cfg)
        np.testing.assert_allclose(chunked.phi()[0], reference.phi()[0], rtol=1e-12)
        assert chunked.balance() == reference.balance()

    def test_single_history_replays(self):
        cfg = _periodic(ConstantCrossSection(1.0), 0.8, 100)
        first, again = run_history(cfg, 17), run_history(cfg, 17)
        np.testing.assert_array_equal(first.track, again.track)
        assert first.histories == 1 and first.emitted == 1

    def test_particle_balance(self):
        grid = SpatialGrid.centered(1.0, 3)
        cfg = RunConfig(ConstantCrossSection(1.0), PhaseFunction((1.0, 0.4)), 0.7,
                        PointSource((0.0, 0.0, 0.0), 2.0), grid, 4_000, boundary="vacuum")
        bal = run_simulation(cfg).balance()
        assert bal["absorbed"] + bal["leaked"] == bal["emitted"] == 4_000
        assert bal["leaked"] > 0
        assert bal["collisions"] == bal["absorbed"] + bal["scatters"]

    def test_infinite_medium_flux(self):
        # periodic box with uniform emission: phi = Q0 / ((1 - c) Sigma_t)
        tallies = run_simulation(_periodic(ConstantCrossSection(1.0), 0.9, 20_000))
        mean, err = tallies.box_average("track")
        assert abs(mean - 10.0) < 4.0 * err + 1e-12
        assert abs(mean - 10.0) < 0.05 * 10.0
        cmean, _ = tallies.box_average("collisions")
        assert cmean == pytest.approx(mean, rel=0.05)

    def test_isotropic_angular_flux(self):
        tallies = run_simulation(_periodic(ConstantCrossSection(1.0), 0.5, 20_000, n_mu=4))
        phi, _ = tallies.box_average("track")
        psi, err = tallies.box_average("psi_track")
        np.testing.assert_array_less(np.abs(psi - phi / (4.0 * np.pi)), 5.0 * err + 0.02 * phi)

    def test_heavy_tail_runs_in_vacuum(self):
        grid = SpatialGrid.centered(2.0, 4)
        model = FreePathPdfCrossSection(DistributionLaw("lomax", shape=2.0, scale=1.0))
        cfg = RunConfig(model, PhaseFunction.isotropic(), 0.5, PointSource((0.0, 0.0, 0.0), 1.0),
                        grid, 2_000, boundary="vacuum")
        phi, _ = run_simulation(cfg).phi()
        assert np.all(np.isfinite(phi)) and phi.sum() > 0.0


class TestStatisticalBehaviour:
    def test_error_shrinks_with_history_count(self):
        base = _periodic(ConstantCrossSection(1.0), 0.5, 20_000, cells=2, half=1.0)
        errors = []
        for histories in (20_000, 40_000):
            cfg = dataclasses.replace(base, histories=histories, batches=400)
            errors.append(run_simulation(cfg).box_average("track")[1])
        assert 1.2 < errors[0] / errors[1] < 1.65

    @pytest.mark.parametrize("family", ["modulated_polar", "modulated_quadratic"])
    def test_free_paths_per_direction_bin(self, model_families, family):
        model = model_families[family]
        u = HistoryStreams(11, np.arange(400_000)).draws(3)
        dirs = isotropic_directions(u[0], u[1])
        s = sample_free_paths(model, dirs, u[2])
        transformed = model.cdf(dirs, s)
        bins = np.digitize(dirs[:, 2], [-0.5, 0.0, 0.5])
        for b in range(4):
            assert stats.kstest(transformed[bins == b], "uniform").statistic < 0.01

    def test_constant_cross_section_matches_exponential_flights(self):
        grid = SpatialGrid.centered(1.5, 3)
        cfg = RunConfig(ConstantCrossSection(1.0), PhaseFunction.isotropic(), 0.5,
                        PointSource((0.0, 0.0, 0.0), 1.0), grid, 20_000, seed=4, boundary="vacuum")
        mean, err = run_simulation(cfg).collision_density()
        reference, ref_err = _exponential_flights(grid, 1.0, 0.5, 20_000, seed=8)
        deviation = np.abs(mean.reshape(grid.shape) - reference)
        np.testing.assert_array_less(deviation, 4.0 * np.hypot(err.reshape(grid.shape), ref_err))


@pytest.mark.slow
class TestInfiniteMediumAcceptance:
    def test_scalar_flux(self):
        tallies = run_simulation(_periodic(ConstantCrossSection(1.0), 0.9, 1_000_000,
                                           cells=5, half=5.0))
        mean, err = tallies.box_average("track")
        assert abs(mean - 10.0) < 3.0 * err
        assert abs(mean - 10.0) < 0.01 * 10.0

    def test_angular_anisotropy(self):
        n_mu = 16
        tallies = run_simulation(_periodic(one_plus_mu2(), 0.95, 1_000_000, n_mu=n_mu,
                                           cells=5, half=5.0))
        phi, _ = tallies.box_average("track")
        psi, err = tallies.box_average("psi_track")
        a, b = tallies.mu_edges[:-1], tallies.mu_edges[1:]
        bin_mean = 1.0 + (b**3 - a**3) / (3.0 * (b - a))
        expected = phi * bin_mean / (4.0 * np.pi * 4.0 / 3.0)
        np.testing.assert_array_less(np.abs(psi - expected), 3.0 * err + 1e-3 * expected)
        np.testing.assert_allclose(psi / phi, expected / phi, rtol=0.03)

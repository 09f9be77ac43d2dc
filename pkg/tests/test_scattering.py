from __future__ import annotations

import numpy as np
import pytest
from scipy import integrate, stats

from nct.scattering.phase import (
    InvalidPhaseFunctionError,
    PhaseFunction,
    build_pstar,
    eval_phase,
    rotate_direction,
    rotate_directions,
    sample_scatter_cosine,
)
from nct.utils.errors import DomainError

LINEAR = PhaseFunction((1.0, 0.3))
FORWARD = PhaseFunction((1.0, 0.5, 0.1))


class TestPhaseFunction:
    def test_isotropic_value(self):
        assert eval_phase(PhaseFunction.isotropic(), 0.2) == pytest.approx(1.0 / (4.0 * np.pi))

    @pytest.mark.parametrize("pf", [LINEAR, FORWARD])
    def test_normalized_on_sphere(self, pf):
        total, _ = integrate.quad(lambda mu: 2.0 * np.pi * float(pf(mu)), -1.0, 1.0)
        assert total == pytest.approx(1.0, rel=1e-12)

    @pytest.mark.parametrize("pf", [LINEAR, FORWARD])
    def test_mean_cosine(self, pf):
        mean, _ = integrate.quad(lambda mu: 2.0 * np.pi * mu * float(pf(mu)), -1.0, 1.0)
        assert mean == pytest.approx(pf.mean_cosine, rel=1e-12)

    def test_a0_must_be_one(self):
        with pytest.raises(InvalidPhaseFunctionError):
            PhaseFunction((0.9, 0.1))

    def test_negative_phase_function_rejected(self):
        with pytest.raises(InvalidPhaseFunctionError, match="negative"):
            PhaseFunction((1.0, 0.9, 0.0, 0.0, -0.8))

    def test_order_cap(self):
        with pytest.raises(InvalidPhaseFunctionError):
            PhaseFunction((1.0,) + (0.0,) * 40)

    def test_cosine_outside_range(self):
        with pytest.raises(DomainError):
            eval_phase(LINEAR, 1.5)


class TestScatteringKernel:
    def test_pstar_mixes_absorption(self):
        kernel = build_pstar(LINEAR, 0.5)
        mu = np.linspace(-1.0, 1.0, 7)
        expected = 0.5 * LINEAR(mu) + 0.5 / (4.0 * np.pi)
        np.testing.assert_allclose(kernel(mu), expected, rtol=1e-14)
        assert kernel.mean_cosine == pytest.approx(0.15)

    def test_pstar_without_scattering_is_isotropic(self):
        assert build_pstar(FORWARD, 0.0).is_isotropic

    @pytest.mark.parametrize("c", [-0.1, 1.2, float("nan")])
    def test_bad_scattering_probability(self, c):
        with pytest.raises(DomainError):
            build_pstar(LINEAR, c)


class TestSampling:
    def test_isotropic_cosines_uniform(self):
        u = np.random.default_rng(7).random(200_000)
        mu = sample_scatter_cosine(PhaseFunction.isotropic(), u)
        assert stats.kstest(mu, stats.uniform(loc=-1.0, scale=2.0).cdf).statistic < 0.005

    def test_sampled_mean_cosine(self):
        u = np.random.default_rng(11).random(400_000)
        mu = sample_scatter_cosine(FORWARD, u)
        assert mu.mean() == pytest.approx(0.5, abs=5e-3)

    def test_rotation_preserves_angle(self):
        rng = np.random.default_rng(3)
        w = rng.normal(size=(1000, 3))
        w /= np.linalg.norm(w, axis=1, keepdims=True)
        mu0 = rng.uniform(-1.0, 1.0, 1000)
        out = rotate_directions(w, mu0, rng.uniform(0.0, 2.0 * np.pi, 1000))
        np.testing.assert_allclose(np.linalg.norm(out, axis=1), 1.0, atol=1e-12)
        np.testing.assert_allclose(np.sum(out * w, axis=1), mu0, atol=1e-10)

    def test_rotation_about_the_pole(self):
        out = rotate_direction([0.0, 0.0, 1.0], 0.0, 0.0)
        np.testing.assert_allclose(out, [1.0, 0.0, 0.0], atol=1e-12)
        back = rotate_direction([0.0, 0.0, -1.0], -1.0, 0.3)
        np.testing.assert_allclose(back, [0.0, 0.0, 1.0], atol=1e-12)

    @pytest.mark.parametrize("incoming", [[0.0, 0.0, 2.0], [1.0, 1.0, 0.0], [0.0, 1.0]])
    def test_incoming_must_be_unit_vector(self, incoming):
        with pytest.raises(DomainError):
            rotate_direction(incoming, 0.5, 0.0)

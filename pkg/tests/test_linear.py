import math

import numpy as np
import pytest
from hypothesis import assume, given
from hypothesis import strategies as st
from scipy.linalg import solve_continuous_lyapunov

from chiarella.errors import NoStationaryDistribution
from chiarella.linear import (
    diffusion_matrix,
    drift_matrix,
    fpe_residuals,
    joint_density,
    linear_validity,
    lyapunov_covariance,
    marginal_delta_density,
)
from chiarella.params import ModelParams

from conftest import random_stable_params


def numeric_covariance(p: ModelParams) -> np.ndarray:
    return solve_continuous_lyapunov(drift_matrix(p), -diffusion_matrix(p))


class TestLyapunovCovariance:
    def test_matches_numeric_solver(self):
        rng = np.random.default_rng(42)
        worst = 0.0
        for _ in range(30):
            p = random_stable_params(rng)
            closed = lyapunov_covariance(p)
            numeric = numeric_covariance(p)
            worst = max(worst, float(np.max(np.abs(closed - numeric) / np.abs(numeric))))
        assert worst < 1e-9

    def test_cross_covariance_sign(self, linear_params):
        # beta*gamma << 1 here, so Cov[delta, M] ~ alpha(2 sigma_N^2 - sigma^2)/(2(alpha+kappa))
        closed = lyapunov_covariance(linear_params)
        assert closed[0, 1] == pytest.approx(numeric_covariance(linear_params)[0, 1], rel=1e-12)
        p = linear_params
        approx = p.alpha * (2 * p.sigma_n**2 - p.sigma_sq) / (2 * (p.alpha + p.kappa))
        assert closed[0, 1] == pytest.approx(approx, rel=1e-3)

    def test_symmetric_positive_definite(self):
        rng = np.random.default_rng(7)
        for _ in range(20):
            cov = lyapunov_covariance(random_stable_params(rng))
            assert cov[0, 1] == cov[1, 0]
            assert np.all(np.linalg.eigvalsh(cov) > 0)

    def test_unstable_raises(self):
        p = ModelParams(kappa=0.01, beta=0.05, gamma=5e4, alpha=2e-5, sigma_n=0.2, sigma_v=0.1)
        with pytest.raises(NoStationaryDistribution):
            lyapunov_covariance(p)


class TestFpeResiduals:
    def test_all_four_vanish(self):
        rng = np.random.default_rng(3)
        for _ in range(50):
            res = fpe_residuals(random_stable_params(rng))
            assert max(abs(r) for r in res) < 1e-9

    @given(
        kappa=st.floats(0.01, 10),
        beta=st.floats(0.0, 10),
        gamma=st.floats(0.0, 10),
        alpha=st.floats(0.01, 10),
        sigma_n=st.floats(0.01, 3),
        sigma_v=st.floats(0.0, 3),
    )
    def test_vanish_property(self, kappa, beta, gamma, alpha, sigma_n, sigma_v):
        assume(alpha * (1 - beta * gamma) + kappa > 1e-6)
        p = ModelParams(
            kappa=kappa, beta=beta, gamma=gamma, alpha=alpha, sigma_n=sigma_n, sigma_v=sigma_v
        )
        res = fpe_residuals(p)
        assert max(abs(res.const), abs(res.delta_sq), abs(res.m_sq), abs(res.cross)) < 1e-9


class TestDensities:
    def test_joint_integrates_to_one(self, linear_params):
        cov = lyapunov_covariance(linear_params)
        s_d, s_m = math.sqrt(cov[0, 0]), math.sqrt(cov[1, 1])
        d = np.linspace(-8 * s_d, 8 * s_d, 301)
        m = np.linspace(-8 * s_m, 8 * s_m, 301)
        dd, mm = np.meshgrid(d, m, indexing="ij")
        z = joint_density(dd, mm, linear_params)
        mass = np.trapezoid(np.trapezoid(z, m, axis=1), d)
        assert mass == pytest.approx(1.0, abs=1e-8)

    def test_marginal_is_gaussian_with_closed_variance(self, linear_params):
        cov = lyapunov_covariance(linear_params)
        x = np.linspace(-4, 4, 9)
        expected = np.exp(-(x**2) / (2 * cov[0, 0])) / math.sqrt(2 * math.pi * cov[0, 0])
        assert marginal_delta_density(x, linear_params) == pytest.approx(expected)


class TestValidity:
    def test_small_saturation_is_valid(self, linear_params):
        v = linear_validity(linear_params)
        assert v.is_valid
        assert v.gamma_sigma_m < 1e-4

    def test_large_saturation_flagged(self):
        p = ModelParams(kappa=0.1, beta=0.5, gamma=1.0, alpha=500.0, sigma_n=0.8, sigma_v=0.1)
        v = linear_validity(p)
        assert not v.is_valid
        assert v.gamma_sigma_m > 0.1

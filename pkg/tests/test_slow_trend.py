import math

import numpy as np
import pytest
from scipy.integrate import quad

from chiarella.params import Modality, ModelParams
from chiarella.slow_trend import (
    conditional_density_x_given_y,
    gaussian_cosh_density,
    locate_modes,
    log_cosh,
    log_normalization_A,
    mixture_density,
    normalization_A,
    slow_frame_y_variance,
)


def params_for_n(n: int, kappa=0.075, beta=0.05, sigma_n=0.2, sigma_v=0.1) -> ModelParams:
    """Choose alpha so the cosh exponent 2*beta/(alpha*gamma*sigma^2) equals n."""
    gamma = 5e4
    sigma_sq = sigma_n**2 + sigma_v**2
    alpha = 2 * beta / (n * gamma * sigma_sq)
    return ModelParams(
        kappa=kappa, beta=beta, gamma=gamma, alpha=alpha, sigma_n=sigma_n, sigma_v=sigma_v
    )


class TestLogCosh:
    def test_small_arguments(self):
        for z in (-2.0, -0.3, 0.0, 0.7, 3.0):
            assert log_cosh(z) == pytest.approx(math.log(math.cosh(z)), abs=1e-14)

    def test_large_arguments_no_overflow(self):
        assert log_cosh(800.0) == pytest.approx(800.0 - math.log(2.0))
        assert log_cosh(-800.0) == pytest.approx(800.0 - math.log(2.0))

    def test_vectorised(self):
        z = np.array([-5.0, 0.0, 5.0])
        out = log_cosh(z)
        assert out.shape == z.shape
        assert out[0] == out[2]


class TestNormalization:
    @pytest.mark.parametrize("n", [1, 2, 3, 4])
    def test_closed_form_vs_quadrature(self, n):
        rng = np.random.default_rng(n)
        p = params_for_n(n)
        width = math.sqrt(p.sigma_sq / (2 * p.kappa))
        for _ in range(5):
            y = float(rng.normal(scale=p.alpha * width))
            closed = log_normalization_A(y, p)

            def integrand(x):
                return math.exp(
                    -p.kappa * x**2 / p.sigma_sq + n * log_cosh(p.gamma * (p.alpha * x + y))
                    - closed
                )

            mass, err = quad(integrand, -np.inf, np.inf, limit=200)
            assert mass == pytest.approx(1.0, rel=1e-9)

    def test_even_in_y(self):
        p = params_for_n(3)
        y = 2.5e-4
        assert log_normalization_A(y, p) == pytest.approx(log_normalization_A(-y, p), rel=1e-13)

    def test_noninteger_exponent_falls_back_to_quadrature(self):
        p = params_for_n(2)
        q = p.replace(alpha=p.alpha * 1.37)  # exponent no longer integral
        val = normalization_A(0.0, q)
        assert val > 0.0
        # cross-check against a plain quadrature of the defining integral
        n = 2 / 1.37

        def integrand(x):
            return math.exp(-q.kappa * x**2 / q.sigma_sq + n * log_cosh(q.gamma * q.alpha * x))

        ref, _ = quad(integrand, -np.inf, np.inf, limit=200)
        assert val == pytest.approx(ref, rel=1e-8)


class TestConditionalDensity:
    def test_integrates_to_one(self):
        p = params_for_n(2)
        for y in (0.0, 3e-4):
            mass, _ = quad(lambda x: conditional_density_x_given_y(x, y, p), -np.inf, np.inf, limit=200)
            assert mass == pytest.approx(1.0, rel=1e-9)

    def test_y_shifts_mass(self):
        p = params_for_n(2)
        y = 4e-4
        up = quad(lambda x: conditional_density_x_given_y(x, y, p), 0, np.inf, limit=200)[0]
        down = quad(lambda x: conditional_density_x_given_y(x, y, p), -np.inf, 0, limit=200)[0]
        assert up > down  # positive frozen trend pushes the mispricing up


class TestGaussianCosh:
    def test_normalised(self, slow_trend_params):
        mass, _ = quad(lambda x: gaussian_cosh_density(x, slow_trend_params), -np.inf, np.inf)
        assert mass == pytest.approx(1.0, rel=1e-10)

    def test_even(self, slow_trend_params):
        x = np.linspace(0.1, 3.0, 7)
        assert gaussian_cosh_density(x, slow_trend_params) == pytest.approx(
            gaussian_cosh_density(-x, slow_trend_params)
        )

    def test_mixture_agrees_at_large_gamma(self, slow_trend_params):
        # the closed form replaces cosh**n by its dominant exponentials, which
        # at n = 2 leaves ~1.5% pointwise error; the mixture itself adds only
        # O(y^2) corrections on top
        x = np.linspace(0.0, 2.0, 9)
        mix = np.array([mixture_density(xi, slow_trend_params) for xi in x])
        closed = gaussian_cosh_density(x, slow_trend_params)
        assert mix == pytest.approx(closed, rel=0.02)

    def test_y_variance(self, slow_trend_params):
        p = slow_trend_params
        assert slow_frame_y_variance(p) == pytest.approx(p.alpha * p.sigma_v**2 / 2)


class TestLocateModes:
    def test_bimodal_below_threshold(self, slow_trend_params):
        # 2 beta^2 / sigma^2 = 0.1 > kappa = 0.075
        v = locate_modes(slow_trend_params)
        assert v.modality is Modality.BIMODAL
        x = max(v.modes)
        p = slow_trend_params
        residual = p.beta * math.tanh(2 * p.beta * x / p.sigma_sq) - p.kappa * x
        assert abs(residual) < 1e-12
        assert v.modes[0] == -v.modes[1]

    def test_unimodal_above_threshold(self, slow_trend_params):
        v = locate_modes(slow_trend_params.replace(kappa=0.2))
        assert v.modality is Modality.UNIMODAL
        assert v.modes == (0.0,)

    def test_threshold_equality_is_unimodal(self):
        beta, sigma_n, sigma_v = 0.05, 0.2, 0.1
        kappa = 2 * beta**2 / (sigma_n**2 + sigma_v**2)
        p = ModelParams(kappa=kappa, beta=beta, gamma=5e4, alpha=2e-5, sigma_n=sigma_n, sigma_v=sigma_v)
        v = locate_modes(p)
        assert v.modality is Modality.UNIMODAL

    def test_just_below_threshold_still_bracketed(self):
        beta, sigma_n, sigma_v = 0.05, 0.2, 0.1
        kappa = 2 * beta**2 / (sigma_n**2 + sigma_v**2) * (1 - 1e-6)
        p = ModelParams(kappa=kappa, beta=beta, gamma=5e4, alpha=2e-5, sigma_n=sigma_n, sigma_v=sigma_v)
        v = locate_modes(p)
        assert v.modality is Modality.BIMODAL
        assert 0 < max(v.modes) < 0.05  # peaks emerge continuously from zero

    def test_curvature_sign_tracks_modality(self, slow_trend_params):
        assert locate_modes(slow_trend_params).curvature > 0
        assert locate_modes(slow_trend_params.replace(kappa=0.2)).curvature < 0

    def test_peaks_match_density_maxima(self, slow_trend_params):
        v = locate_modes(slow_trend_params)
        x_star = max(v.modes)
        p_star = gaussian_cosh_density(x_star, slow_trend_params)
        for dx in (-1e-4, 1e-4):
            assert gaussian_cosh_density(x_star + dx, slow_trend_params) < p_star

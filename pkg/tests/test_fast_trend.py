import math

import numpy as np
import pytest
from scipy.integrate import quad

from chiarella.fast_trend import (
    effective_params,
    gamma_ratio_expansion,
    novikov_cosh_expectation,
    regime_warnings,
    telegraph_autocov,
    variance_x,
    weak_coupling_density,
)
from chiarella.params import ModelParams, derive_params


class TestTelegraphAutocov:
    def test_anchor_values(self):
        assert telegraph_autocov(0.0, 3.0) == pytest.approx(1.0)
        assert telegraph_autocov(math.log(2) / 3.0, 3.0) == pytest.approx(1.0 / 3.0, abs=1e-14)
        assert telegraph_autocov(1e6, 3.0) == pytest.approx(0.0, abs=1e-12)

    def test_monotone_and_bounded(self):
        tau = np.linspace(0.0, 10.0, 200)
        c = telegraph_autocov(tau, 1.7)
        assert np.all(np.diff(c) <= 0)
        assert np.all((c >= 0) & (c <= 1))


class TestEffectiveParams:
    def test_common_renormalisation(self, fast_trend_params):
        p = fast_trend_params
        k_eff, b_eff = effective_params(p)
        theta = derive_params(p).theta
        assert k_eff == pytest.approx(p.kappa * (1 + 2 * theta / math.sqrt(math.pi)))
        assert b_eff / k_eff == pytest.approx(p.beta / p.kappa, rel=1e-14)

    def test_zero_coupling_is_identity(self):
        p = ModelParams(kappa=0.3, beta=0.0, gamma=1.0, alpha=100.0, sigma_n=0.5, sigma_v=0.1)
        assert effective_params(p) == pytest.approx((0.3, 0.0))

    def test_requires_news_noise(self, fast_trend_params):
        with pytest.raises(ZeroDivisionError):
            effective_params(fast_trend_params.replace(sigma_n=0.0))


class TestVarianceX:
    def test_zero_coupling_is_ou(self):
        p = ModelParams(kappa=0.2, beta=0.0, gamma=1.0, alpha=200.0, sigma_n=0.5, sigma_v=0.2)
        mom = variance_x(p)
        assert mom.x_sq_exact == pytest.approx(p.sigma_sq / (2 * p.kappa), rel=1e-12)
        assert mom.a_sq == 0.0

    def test_exact_decomposition(self, fast_trend_params):
        mom = variance_x(fast_trend_params)
        ou = fast_trend_params.sigma_sq / (2 * mom.kappa_eff)
        assert mom.x_sq_exact == pytest.approx(mom.a_sq + ou + 2 * mom.ab, rel=1e-14)
        assert mom.x_sq_exact >= ou

    def test_truncation_error_is_third_order(self, fast_trend_params):
        p = fast_trend_params

        def gap(beta):
            mom = variance_x(p.replace(beta=beta))
            return abs(mom.x_sq_exact - mom.x_sq_truncated)

        # halving theta should shrink the exact-truncated gap ~8x
        ratio = gap(1.0) / gap(0.5)
        assert 6.0 < ratio < 10.0

    def test_guards_warn_out_of_regime(self):
        slow = ModelParams(kappa=1.0, beta=0.1, gamma=1.0, alpha=20.0, sigma_n=0.5, sigma_v=0.1)
        with pytest.warns(RuntimeWarning):
            notes = regime_warnings(slow)
        assert any("alpha" in n for n in notes)
        strong = ModelParams(kappa=0.1, beta=10.0, gamma=1.0, alpha=500.0, sigma_n=0.8, sigma_v=0.1)
        with pytest.warns(RuntimeWarning):
            mom = variance_x(strong)
        assert any("theta" in n.lower() for n in mom.warnings)

    def test_in_regime_is_quiet(self, fast_trend_params):
        assert regime_warnings(fast_trend_params) == ()


class TestWeakCouplingDensity:
    def test_gaussian_with_exact_variance(self, fast_trend_params):
        mom = variance_x(fast_trend_params)
        x = np.linspace(-3, 3, 11)
        expected = np.exp(-(x**2) / (2 * mom.x_sq_exact)) / math.sqrt(2 * math.pi * mom.x_sq_exact)
        assert weak_coupling_density(x, fast_trend_params) == pytest.approx(expected)

    def test_normalised(self, fast_trend_params):
        mass, _ = quad(lambda x: weak_coupling_density(x, fast_trend_params), -np.inf, np.inf)
        assert mass == pytest.approx(1.0, abs=1e-10)


class TestGammaRatioExpansion:
    def test_at_zero_both_root_pi(self):
        exact, first = gamma_ratio_expansion(0.0)
        assert exact == pytest.approx(math.sqrt(math.pi), rel=1e-15)
        assert first == exact

    def test_second_order_convergence(self):
        errs = [abs(np.subtract(*gamma_ratio_expansion(eps))) for eps in (1e-2, 5e-3, 2.5e-3)]
        assert errs[0] / errs[1] == pytest.approx(4.0, abs=0.3)
        assert errs[1] / errs[2] == pytest.approx(4.0, abs=0.3)

    def test_fig_regime_agreement(self, fast_trend_params):
        mom = variance_x(fast_trend_params)
        eps = mom.kappa_eff / (2 * fast_trend_params.alpha)
        exact, first = gamma_ratio_expansion(eps)
        assert abs(exact - first) / exact < 1e-6

    def test_rejects_out_of_domain(self):
        with pytest.raises(ValueError):
            gamma_ratio_expansion(0.5)
        with pytest.raises(ValueError):
            gamma_ratio_expansion(-0.1)


class TestNovikov:
    def test_sech_sq_mass_is_two(self):
        def sech_sq(z):
            e = math.exp(-2.0 * abs(z))  # overflow-safe for the infinite-range transform
            return 4.0 * e / (1.0 + e) ** 2

        mass, _ = quad(sech_sq, -np.inf, np.inf)
        assert mass == pytest.approx(2.0, abs=1e-12)

    @pytest.mark.parametrize("w", [50.0, 100.0, 500.0])
    def test_leading_term_accuracy(self, w):
        # build params with gamma^2 alpha sigma_n^2 / 2 = w
        p = ModelParams(kappa=0.1, beta=1.0, gamma=1.0, alpha=1.0, sigma_n=math.sqrt(2 * w), sigma_v=0.0)
        res = novikov_cosh_expectation(p)
        assert res.leading == pytest.approx(2.0 / (p.gamma * p.sigma_n * math.sqrt(math.pi * p.alpha)))
        assert abs(res.quadrature - res.leading) / res.quadrature < 2.0 / w

    def test_ratio_approaches_one(self):
        def ratio(w):
            p = ModelParams(
                kappa=0.1, beta=1.0, gamma=1.0, alpha=1.0, sigma_n=math.sqrt(2 * w), sigma_v=0.0
            )
            res = novikov_cosh_expectation(p)
            return res.leading / res.quadrature

        assert abs(ratio(1e4) - 1.0) < abs(ratio(1e2) - 1.0)
        assert ratio(1e4) == pytest.approx(1.0, abs=1e-3)

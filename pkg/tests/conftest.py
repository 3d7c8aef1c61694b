import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from chiarella.params import ModelParams

settings.register_profile(
    "default",
    deadline=None,
    max_examples=50,
    suppress_health_check=[HealthCheck.too_slow],
)
settings.load_profile("default")


@pytest.fixture
def linear_params() -> ModelParams:
    # gamma small: saturation never engages, the Gaussian law is exact
    return ModelParams(kappa=0.1, beta=0.2, gamma=1e-4, alpha=0.2, sigma_n=0.2, sigma_v=0.1)


@pytest.fixture
def slow_trend_params() -> ModelParams:
    # alpha << kappa, gamma large: two-peaked mispricing law
    return ModelParams(kappa=0.075, beta=0.05, gamma=5e4, alpha=2e-5, sigma_n=0.2, sigma_v=0.1)


@pytest.fixture
def fast_trend_params() -> ModelParams:
    # alpha >> kappa, weak coupling
    return ModelParams(kappa=0.1, beta=0.5, gamma=1.0, alpha=500.0, sigma_n=0.8, sigma_v=0.1)


@pytest.fixture
def strong_coupling_params() -> ModelParams:
    # alpha, beta >> kappa: bistable trend, single-peaked mispricing
    return ModelParams(kappa=0.05, beta=5.0, gamma=1.0, alpha=50.0, sigma_n=0.7, sigma_v=0.2)


def random_stable_params(rng: np.random.Generator, allow_sigma_v_zero: bool = True) -> ModelParams:
    """Log-uniform parameter draw conditioned on a stable deterministic core."""
    while True:
        kappa = float(10.0 ** rng.uniform(-2, 1))
        beta = float(10.0 ** rng.uniform(-2, 1))
        gamma = float(10.0 ** rng.uniform(-2, 1))
        alpha = float(10.0 ** rng.uniform(-2, 1))
        sigma_n = float(10.0 ** rng.uniform(-2, 0.5))
        sigma_v = float(10.0 ** rng.uniform(-2, 0.5))
        if allow_sigma_v_zero and rng.random() < 0.2:
            sigma_v = 0.0
        if alpha * (1.0 - beta * gamma) + kappa > 1e-6:
            return ModelParams(
                kappa=kappa, beta=beta, gamma=gamma, alpha=alpha, sigma_n=sigma_n, sigma_v=sigma_v
            )

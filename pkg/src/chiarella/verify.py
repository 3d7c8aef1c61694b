"""Self-verification: every closed form checked against an independent route.

Each check pits a formula against a generic numerical method (dense linear
solve, adaptive quadrature, finite differences, or a simulation with known
law) and reports a named pass/fail record.  ``run_all`` is what the CLI
``verify`` subcommand executes; the same checks back the test suite.
"""

from __future__ import annotations

import math
import time
from dataclasses import asdict, dataclass

import numpy as np
from scipy.linalg import solve_lyapunov
from scipy.signal import lfilter

from . import fast_trend, linear, slow_trend, strong_coupling
from .engine import ReducedState, SimSpec, simulate, step_full, step_reduced, FullState
from .params import ModelParams, derive_params

__all__ = ["CheckResult", "run_all"]


@dataclass(frozen=True)
class CheckResult:
    name: str
    passed: bool
    detail: str
    elapsed_s: float

    def __post_init__(self):
        # numpy comparison results sneak in as np.bool_; keep the record
        # JSON-serialisable without burdening each call site
        object.__setattr__(self, "passed", bool(self.passed))
        object.__setattr__(self, "elapsed_s", float(self.elapsed_s))


def _random_stable_params(rng: np.random.Generator) -> ModelParams:
    """Draw parameters uniform in log over wide ranges, conditioned stable."""
    while True:
        kappa = 10.0 ** rng.uniform(-3, 1)
        alpha = 10.0 ** rng.uniform(-3, 2)
        beta = 10.0 ** rng.uniform(-3, 1)
        gamma = 10.0 ** rng.uniform(-3, 1)
        sigma_n = 10.0 ** rng.uniform(-2, 0.5)
        sigma_v = 10.0 ** rng.uniform(-2, 0.5) if rng.uniform() < 0.8 else 0.0
        if alpha * (1.0 - beta * gamma) + kappa > 1e-6:
            return ModelParams(kappa, beta, gamma, alpha, sigma_n, sigma_v)


def check_lyapunov_closed_form(n_sets: int = 200, seed: int = 11) -> CheckResult:
    """Closed-form stationary covariance vs a generic Lyapunov solve."""
    t0 = time.perf_counter()
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(n_sets):
        p = _random_stable_params(rng)
        closed = linear.lyapunov_covariance(p)
        numeric = solve_lyapunov(linear.drift_matrix(p), -linear.diffusion_matrix(p))
        scale = np.abs(numeric).max()
        worst = max(worst, float(np.abs(closed - numeric).max() / scale))
    return CheckResult(
        "lyapunov-closed-form",
        worst < 1e-10,
        f"max relative deviation {worst:.3e} over {n_sets} stable parameter sets",
        time.perf_counter() - t0,
    )


def check_fpe_residuals(n_sets: int = 1000, seed: int = 12) -> CheckResult:
    """All four stationary-FPE residuals vanish for random stable parameters."""
    t0 = time.perf_counter()
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(n_sets):
        p = _random_stable_params(rng)
        res = linear.fpe_residuals(p)
        worst = max(worst, max(abs(r) for r in res))
    return CheckResult(
        "fpe-residuals",
        worst < 1e-9,
        f"max normalised residual {worst:.3e} over {n_sets} stable parameter sets",
        time.perf_counter() - t0,
    )


def check_normalization_closed_vs_quadrature(
    per_n: int = 50, seed: int = 13
) -> CheckResult:
    """Integer-exponent cosh-sum normalisation vs adaptive quadrature."""
    t0 = time.perf_counter()
    rng = np.random.default_rng(seed)
    worst = 0.0
    for n in (1, 2, 3, 4):
        for _ in range(per_n):
            kappa = 10.0 ** rng.uniform(-2, 0)
            gamma = 10.0 ** rng.uniform(-1, 1)
            sigma_n = 10.0 ** rng.uniform(-1, 0)
            sigma_v = 10.0 ** rng.uniform(-1, 0)
            beta = 10.0 ** rng.uniform(-2, 0)
            s2 = sigma_n**2 + sigma_v**2
            alpha = 2.0 * beta / (n * gamma * s2)  # forces the exponent to n
            p = ModelParams(kappa, beta, gamma, alpha, sigma_n, sigma_v)
            y = rng.normal() * math.sqrt(slow_trend.slow_frame_y_variance(p) + 1e-4)
            closed = slow_trend.log_normalization_A(y, p)
            quad = slow_trend._log_A_quadrature(y, p, float(n))
            worst = max(worst, abs(math.expm1(closed - quad)))
    return CheckResult(
        "normalization-closed-vs-quadrature",
        worst < 1e-8,
        f"max relative deviation {worst:.3e} over 4x{per_n} draws",
        time.perf_counter() - t0,
    )


def check_theta_critical() -> CheckResult:
    t0 = time.perf_counter()
    tc = strong_coupling.theta_critical()
    err = abs(tc - 0.797999)
    return CheckResult(
        "theta-critical",
        err <= 1e-5 and abs(strong_coupling.z_of_theta(tc)) < 1e-9,
        f"theta_c = {tc:.9f}, |Z(theta_c)| = {abs(strong_coupling.z_of_theta(tc)):.2e}",
        time.perf_counter() - t0,
    )


def check_gamma_ratio_convergence() -> CheckResult:
    """First-order truncation error shrinks fourfold when eps halves."""
    t0 = time.perf_counter()
    errs = []
    for eps in (1e-2, 5e-3, 2.5e-3):
        exact, first = fast_trend.gamma_ratio_expansion(eps)
        errs.append(abs(exact - first))
    r1, r2 = errs[0] / errs[1], errs[1] / errs[2]
    ok = abs(r1 - 4.0) <= 0.3 and abs(r2 - 4.0) <= 0.3
    return CheckResult(
        "gamma-ratio-convergence",
        ok,
        f"error ratios {r1:.3f}, {r2:.3f} (expect 4.0 +- 0.3)",
        time.perf_counter() - t0,
    )


def check_novikov_expectation() -> CheckResult:
    """Leading sech**2 expectation vs quadrature at several noise scales."""
    t0 = time.perf_counter()
    details = []
    ok = True
    for w in (50.0, 100.0, 500.0):
        # realise the requested w with unit gamma and alpha
        sigma_n = math.sqrt(2.0 * w)
        p = ModelParams(kappa=0.1, beta=0.1, gamma=1.0, alpha=1.0, sigma_n=sigma_n, sigma_v=0.0)
        assert abs(derive_params(p).w - w) < 1e-9 * w
        leading, quad = fast_trend.novikov_cosh_expectation(p)
        rel = abs(leading - quad) / quad
        ok = ok and rel < 2.0 / w
        details.append(f"w={w:g}: rel err {rel:.2e} < {2.0 / w:.2e}")
    return CheckResult(
        "novikov-expectation", ok, "; ".join(details), time.perf_counter() - t0
    )


def check_telegraph_autocov(seed: int = 14) -> CheckResult:
    """Simulated sign-of-OU autocovariance vs the arcsine law.

    Uses the exact AR(1) discretisation of the OU trend (no integrator
    bias), 16 replicate paths, and compares at lags 0, ~1/alpha, ~2/alpha
    and exactly ln(2)/alpha within three standard errors of the replicate
    scatter.
    """
    t0 = time.perf_counter()
    alpha = 1.0
    dt = math.log(2.0) / (64.0 * alpha)  # puts lag ln2/alpha exactly on-grid
    n_steps = 500_000
    n_paths = 16
    lags = [0, 64, round(1.0 / (alpha * dt)), round(2.0 / (alpha * dt))]
    rng = np.random.default_rng(seed)
    rho = math.exp(-alpha * dt)
    innov_sd = math.sqrt(1.0 - rho * rho)
    burn = 2000  # ~20 relaxation times: forgets the zero start
    estimates = np.empty((n_paths, len(lags)))
    for i in range(n_paths):
        xi = rng.standard_normal(n_steps + burn)
        y = lfilter([innov_sd], [1.0, -rho], xi)[burn:]
        s = np.sign(y)
        s[s == 0] = 1.0
        for j, lag in enumerate(lags):
            estimates[i, j] = np.mean(s[: n_steps - lag] * s[lag:]) if lag else 1.0
    mean = estimates.mean(axis=0)
    se = estimates.std(axis=0, ddof=1) / math.sqrt(n_paths)
    details = []
    ok = True
    for j, lag in enumerate(lags):
        tau = lag * dt
        target = fast_trend.telegraph_autocov(tau, alpha)
        gap = abs(mean[j] - target)
        bound = 3.0 * se[j]
        if lag == 0:
            this_ok = gap == 0.0
        else:
            this_ok = gap <= bound
        ok = ok and this_ok
        details.append(f"tau={tau:.4f}: |{mean[j]:.4f}-{target:.4f}| vs 3SE={bound:.4f}")
    exact_third = fast_trend.telegraph_autocov(math.log(2.0) / alpha, alpha)
    ok = ok and abs(exact_third - 1.0 / 3.0) < 1e-14
    details.append(f"analytic value at ln2/alpha: {exact_third!r}")
    return CheckResult(
        "telegraph-autocov", ok, "; ".join(details), time.perf_counter() - t0
    )


def check_full_reduced_consistency(seed: int = 15) -> CheckResult:
    """Full-system mispricing tracks the reduced system step by step."""
    t0 = time.perf_counter()
    p = ModelParams(kappa=0.3, beta=0.5, gamma=2.0, alpha=1.5, sigma_n=0.3, sigma_v=0.2, g=0.07)
    rng = np.random.default_rng(seed)
    dt = 1e-3
    full = FullState(price=0.4, m=-0.2, value=0.1)
    red = ReducedState(delta=full.delta, m=full.m)
    worst = 0.0
    for _ in range(10_000):
        noise = tuple(rng.standard_normal(2))
        full = step_full(full, p, dt, noise)
        red = step_reduced(red, p, dt, noise)
        worst = max(worst, abs(full.delta - red.delta), abs(full.m - red.m))
    return CheckResult(
        "full-reduced-consistency",
        worst < 1e-12,
        f"max per-step divergence {worst:.3e} over 1e4 steps (drift g={p.g})",
        time.perf_counter() - t0,
    )


def check_engine_determinism() -> CheckResult:
    """Identical seeds give bit-identical merged summaries."""
    t0 = time.perf_counter()
    p = ModelParams(kappa=0.5, beta=0.4, gamma=1.0, alpha=2.0, sigma_n=0.3, sigma_v=0.1)
    spec = SimSpec(params=p, total_time=200.0, dt=0.01, seed=77, n_paths=3, subsample_stride=10)
    a = simulate(spec)
    b = simulate(spec)
    same = (
        np.array_equal(a.hist_delta.counts, b.hist_delta.counts)
        and np.array_equal(a.hist_m.counts, b.hist_m.counts)
        and np.array_equal(a.moments_delta, b.moments_delta)
        and np.array_equal(a.moments_m, b.moments_m)
        and np.array_equal(a.hist_delta.edges, b.hist_delta.edges)
    )
    return CheckResult(
        "engine-determinism",
        same,
        "two runs with the same seed produced identical summaries" if same else "summaries differ",
        time.perf_counter() - t0,
    )


def check_ou_variance() -> CheckResult:
    """With the feedback off the mispricing is OU with known variance."""
    t0 = time.perf_counter()
    p = ModelParams(kappa=0.5, beta=0.0, gamma=1.0, alpha=2.0, sigma_n=0.3, sigma_v=0.1)
    spec = SimSpec(
        params=p, total_time=4000.0, dt=0.005, seed=99, n_paths=4, subsample_stride=20
    )
    stats = simulate(spec)
    from .empirics import moments_with_errors

    est = moments_with_errors(stats, "delta")["variance"]
    target = p.sigma_sq / (2.0 * p.kappa)
    gap = abs(est.value - target)
    return CheckResult(
        "ou-variance",
        gap <= 3.0 * est.se,
        f"|{est.value:.5f} - {target:.5f}| = {gap:.2e} vs 3SE = {3 * est.se:.2e}",
        time.perf_counter() - t0,
    )


_ALL_CHECKS = (
    check_lyapunov_closed_form,
    check_fpe_residuals,
    check_normalization_closed_vs_quadrature,
    check_theta_critical,
    check_gamma_ratio_convergence,
    check_novikov_expectation,
    check_telegraph_autocov,
    check_full_reduced_consistency,
    check_engine_determinism,
    check_ou_variance,
)


def run_all() -> dict:
    """Run every self-check; returns a JSON-ready report."""
    results = [asdict(check()) for check in _ALL_CHECKS]
    return {
        "checks": results,
        "all_passed": all(r["passed"] for r in results),
    }

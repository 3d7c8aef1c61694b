"""Stationary mispricing law when the trend relaxes much slower than prices.

With ``alpha << kappa`` the pair is best viewed in the sheared frame
``x = delta``, ``y = m - alpha*delta``: ``y`` is a slow Ornstein-Uhlenbeck
variable (variance ``alpha*sigma_v**2/2``), and for frozen ``y`` the
mispricing equilibrates to

    p(x | y) = exp(-kappa*x**2/sigma_sq) * cosh(gamma*(alpha*x + y))**n / A(y)

with ``n = 2*beta/(alpha*gamma*sigma_sq)``.  For integer ``n`` the
normalisation ``A(y)`` reduces to a finite cosh sum evaluated here in log
space; otherwise an adaptive quadrature takes over.  Averaging over the slow
``y`` at strong saturation collapses the law to a two-term Gaussian-cosh
density whose peak structure gives the analytic bimodality criterion.
"""

from __future__ import annotations

import math

import numpy as np
from scipy import integrate, optimize
from scipy.special import logsumexp

from .errors import BracketFailure, QuadratureFailure
from .params import (
    Modality,
    ModalityVerdict,
    ModelParams,
    VerdictSource,
    derive_params,
)

__all__ = [
    "log_cosh",
    "normalization_A",
    "log_normalization_A",
    "conditional_density_x_given_y",
    "gaussian_cosh_density",
    "mixture_density",
    "slow_frame_y_variance",
    "locate_modes",
]

_INTEGER_N_RTOL = 1e-9


def log_cosh(z):
    """``log(cosh(z))`` without overflow, valid for any magnitude."""
    z = np.abs(z)
    return z + np.log1p(np.exp(-2.0 * z)) - math.log(2.0)


def _integer_exponent(p: ModelParams) -> int | None:
    n = derive_params(p).n_exponent
    if not math.isfinite(n) or n <= 0:
        return None
    k = round(n)
    if k >= 1 and abs(n - k) <= _INTEGER_N_RTOL * max(1.0, abs(n)):
        return int(k)
    return None


def _log_binomial(n: int, k: int) -> float:
    return math.lgamma(n + 1) - math.lgamma(k + 1) - math.lgamma(n - k + 1)


def _log_A_closed(y: float, p: ModelParams, n: int) -> float:
    """Finite cosh-sum form of ``log A(y)`` for integer exponent ``n``.

    Expanding ``cosh**n`` into exponentials and integrating each Gaussian
    term gives, with ``q = (alpha*gamma*sigma)**2 / (4*kappa)`` and parity
    ``eps = n % 2``:

        A(y) = sqrt(pi*sigma_sq/kappa) * 2**(1-n) * [ B(n, (n-eps)/2) * c0
               + sum_{j=1}^{n//2} B(n, (n-eps)/2 - j)
                 * cosh(gamma*(2*j+eps)*y) * exp(q*(2*j+eps)**2) ]

    where ``c0`` is ``1/2`` for even ``n`` and ``cosh(gamma*y)*exp(q)`` for
    odd ``n``, and ``B`` is the binomial coefficient.
    """
    s2 = p.sigma_sq
    q = (p.alpha * p.gamma) ** 2 * s2 / (4.0 * p.kappa)
    eps = n % 2
    half = (n - eps) // 2
    logs = []
    if eps == 0:
        logs.append(_log_binomial(n, half) + math.log(0.5))
    else:
        logs.append(_log_binomial(n, half) + float(log_cosh(p.gamma * y)) + q)
    for j in range(1, n // 2 + 1):
        k = 2 * j + eps
        logs.append(
            _log_binomial(n, half - j) + float(log_cosh(p.gamma * k * y)) + q * k * k
        )
    return (
        0.5 * math.log(math.pi * s2 / p.kappa)
        - (n - 1) * math.log(2.0)
        + float(logsumexp(logs))
    )


def _log_integrand(x: float, y: float, p: ModelParams, n: float) -> float:
    return float(
        n * log_cosh(p.gamma * (p.alpha * x + y)) - p.kappa * x * x / p.sigma_sq
    )


def _log_A_quadrature(y: float, p: ModelParams, n: float) -> float:
    """Shift-and-integrate fallback for non-integer exponents.

    The integrand's log is maximised numerically, subtracted off, and the
    remainder integrated adaptively, so the result is overflow-safe for
    large coupling.
    """
    s2 = p.sigma_sq
    width = math.sqrt(s2 / p.kappa)
    pull = n * p.gamma * p.alpha * s2 / (2.0 * p.kappa)
    bound = pull + abs(y) / p.alpha + 10.0 * width if p.alpha > 0 else pull + 10.0 * width
    bound = max(bound, 10.0 * width)
    grid = np.linspace(-bound, bound, 4001)
    logs = n * log_cosh(p.gamma * (p.alpha * grid + y)) - p.kappa * grid**2 / s2
    i0 = int(np.argmax(logs))
    x0 = float(grid[i0])
    f0 = float(logs[i0])
    res = optimize.minimize_scalar(
        lambda x: -_log_integrand(x, y, p, n),
        bracket=None,
        bounds=(max(-bound, x0 - width), min(bound, x0 + width)),
        method="bounded",
    )
    if res.success and -res.fun > f0:
        x0, f0 = float(res.x), float(-res.fun)

    def shifted(x):
        return math.exp(_log_integrand(x, y, p, n) - f0)

    points = sorted({-abs(x0), 0.0, abs(x0)})
    value, abserr = integrate.quad(
        shifted, -bound, bound, points=points, limit=300, epsabs=0.0, epsrel=1e-12
    )
    if not math.isfinite(value) or value <= 0.0 or abserr > 1e-10 * value:
        raise QuadratureFailure(
            f"normalisation quadrature error {abserr:.3g} exceeds 1e-10 relative"
        )
    return f0 + math.log(value)


def log_normalization_A(y: float, p: ModelParams) -> float:
    """Log of the conditional-density normalisation ``A(y)``.

    Uses the closed cosh-sum when the exponent ``n`` is an integer to within
    1e-9 relative, otherwise adaptive quadrature at 1e-10 relative accuracy.
    """
    n_int = _integer_exponent(p)
    if n_int is not None:
        return _log_A_closed(float(y), p, n_int)
    n = derive_params(p).n_exponent
    if not math.isfinite(n):
        raise ValueError("cosh exponent is not finite; need alpha*gamma*sigma_sq > 0")
    return _log_A_quadrature(float(y), p, n)


def normalization_A(y: float, p: ModelParams) -> float:
    """Normalisation ``A(y)`` itself; may overflow to ``inf`` for extreme
    arguments, in which case work with :func:`log_normalization_A`."""
    return math.exp(log_normalization_A(y, p))


def conditional_density_x_given_y(x, y: float, p: ModelParams):
    """Stationary mispricing density conditional on a frozen slow trend."""
    n = derive_params(p).n_exponent
    log_a = log_normalization_A(y, p)
    x = np.asarray(x, dtype=float)
    logp = (
        n * log_cosh(p.gamma * (p.alpha * x + y))
        - p.kappa * x**2 / p.sigma_sq
        - log_a
    )
    out = np.exp(logp)
    return out if out.ndim else float(out)


def slow_frame_y_variance(p: ModelParams) -> float:
    """Stationary variance of the slow frame coordinate ``y = m - alpha*x``."""
    return 0.5 * p.alpha * p.sigma_v**2


def gaussian_cosh_density(x, p: ModelParams):
    """Saturated-feedback stationary law of the mispricing.

    ``p(x) = sqrt(kappa/(pi*sigma_sq)) * exp(-beta**2/(kappa*sigma_sq))
    * cosh(2*beta*x/sigma_sq) * exp(-kappa*x**2/sigma_sq)`` — exactly
    normalised, independent of ``alpha`` and ``gamma``.  Evaluated in log
    space so large ``beta**2/(kappa*sigma_sq)`` cannot overflow.
    """
    s2 = p.sigma_sq
    x = np.asarray(x, dtype=float)
    logp = (
        0.5 * math.log(p.kappa / (math.pi * s2))
        - p.beta**2 / (p.kappa * s2)
        + log_cosh(2.0 * p.beta * x / s2)
        - p.kappa * x**2 / s2
    )
    out = np.exp(logp)
    return out if out.ndim else float(out)


def mixture_density(x, p: ModelParams, epsrel: float = 1e-9):
    """Mispricing density averaged over the slow trend's Gaussian law.

    Numerically integrates ``p(x|y)`` against the stationary normal law of
    ``y``.  This is the finite-``gamma`` refinement of
    :func:`gaussian_cosh_density`; the two agree as saturation sharpens.
    """
    var_y = slow_frame_y_variance(p)
    if var_y == 0.0:
        return conditional_density_x_given_y(x, 0.0, p)
    sd = math.sqrt(var_y)
    x_arr = np.atleast_1d(np.asarray(x, dtype=float))
    out = np.empty_like(x_arr)
    for i, xi in enumerate(x_arr):
        def f(y, xi=xi):
            return (
                float(conditional_density_x_given_y(xi, y, p))
                * math.exp(-0.5 * (y / sd) ** 2)
                / (sd * math.sqrt(2.0 * math.pi))
            )
        val, _ = integrate.quad(
            f,
            -8.0 * sd,
            8.0 * sd,
            points=[-p.alpha * xi] if abs(p.alpha * xi) < 8.0 * sd else None,
            limit=200,
            epsabs=0.0,
            epsrel=epsrel,
        )
        out[i] = val
    return out if np.ndim(x) else float(out[0])


def locate_modes(p: ModelParams) -> ModalityVerdict:
    """Peak structure of the saturated-feedback law.

    The density has two symmetric peaks iff ``kappa < 2*beta**2/sigma_sq``
    (equality gives a single flat-topped peak, classified unimodal).  Peak
    locations solve ``beta*tanh(2*beta*x/sigma_sq) = kappa*x``, found by
    root bracketing on ``(0, 1.01*beta/kappa]`` — the feedback can never
    push the mispricing beyond ``beta/kappa``.  The reported ``curvature``
    is the sign proxy ``4*beta**2/sigma_sq**2 - 2*kappa/sigma_sq`` for the
    density's second derivative at the origin.

    Raises
    ------
    BracketFailure
        If the bimodal-side bracket holds no sign change (cannot happen for
        valid parameters; guards numerical pathologies).
    """
    s2 = p.sigma_sq
    if s2 == 0.0:
        raise ValueError("modality undefined for a noise-free model")
    curvature = 4.0 * p.beta**2 / s2**2 - 2.0 * p.kappa / s2
    if p.kappa >= 2.0 * p.beta**2 / s2:
        return ModalityVerdict(
            Modality.UNIMODAL,
            (0.0,),
            VerdictSource.ANALYTIC_SLOW_TREND,
            curvature=curvature,
        )

    a = 2.0 * p.beta / s2

    def f(x):
        return p.beta * math.tanh(a * x) - p.kappa * x

    hi = 1.01 * p.beta / p.kappa
    lo = 1e-12 * hi
    if f(lo) <= 0.0 or f(hi) >= 0.0:
        raise BracketFailure(
            f"no sign change on ({lo:.3g}, {hi:.3g}); f(lo)={f(lo):.3g}, f(hi)={f(hi):.3g}"
        )
    x_star = float(optimize.brentq(f, lo, hi, xtol=1e-30, rtol=4.0 * np.finfo(float).eps))
    return ModalityVerdict(
        Modality.BIMODAL,
        (-x_star, x_star),
        VerdictSource.ANALYTIC_SLOW_TREND,
        curvature=curvature,
    )

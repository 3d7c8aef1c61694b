"""Quasi-static laws when both the trend and its feedback are fast and strong.

For ``alpha, beta >> kappa`` the trend equilibrates at every frozen
mispricing ``x`` to

    p(M | x) ∝ cosh(gamma*M)**(2*beta/(sigma_n**2*alpha*gamma))
              * exp(-M**2/(sigma_n**2*alpha) + 2*kappa*M*x/(sigma_n**2*alpha)),

which is bimodal in ``M`` whenever ``beta*gamma > 1``.  Averaging the
saturated feedback over this law and linearising in ``x`` leaves an
effective restoring rate ``kappa*Z(theta)`` with

    Z(theta) = 1 - 2*theta**2
               + (2/sqrt(pi)) * theta * exp(-theta**2) / (1 + erf(theta)),

so the mispricing keeps a Gaussian quasi-static law only while ``Z > 0``;
the root ``theta_c`` of ``Z`` marks the (indicative) onset of mispricing
bimodality.  Hopping between the two trend lobes is thermally activated
with an Arrhenius time ``exp(theta**2)/alpha``, which also bounds how long
a simulation must run to sample both lobes.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy import integrate
from scipy.special import log_ndtr

from .errors import NoBarrier, NoGaussianDensity, UnsupportedRegime
from .params import (
    ModalityVerdict,
    ModelParams,
    Regime,
    derive_params,
    predict_modality,
)
from .slow_trend import log_cosh

__all__ = [
    "z_of_theta",
    "theta_critical",
    "expected_tanh_given_x",
    "sigma_x_sq",
    "quasi_static_x_density",
    "conditional_density_m_given_x",
    "trend_marginal_density",
    "TrendBimodality",
    "trend_bimodality",
    "arrhenius_crossing_time",
    "StrongCouplingReport",
    "strong_coupling_report",
]

_SQRT_PI = math.sqrt(math.pi)
_LN2 = math.log(2.0)


def z_of_theta(theta: float) -> float:
    """Effective restoring-rate factor of the quasi-static mispricing."""
    if theta < 0.0:
        raise ValueError(f"theta must be >= 0, got {theta}")
    return (
        1.0
        - 2.0 * theta**2
        + (2.0 / _SQRT_PI) * theta * math.exp(-(theta**2)) / (1.0 + math.erf(theta))
    )


@lru_cache(maxsize=1)
def theta_critical() -> float:
    """Root of ``Z`` on (0, 2), located by bisection to 1e-10.

    ``Z`` starts at 1, is eventually dominated by ``-2*theta**2``, and
    crosses zero exactly once on this interval.
    """
    lo, hi = 0.0, 2.0
    f_lo = z_of_theta(lo)
    for _ in range(60):
        mid = 0.5 * (lo + hi)
        f_mid = z_of_theta(mid)
        if f_lo * f_mid <= 0.0:
            hi = mid
        else:
            lo, f_lo = mid, f_mid
        if hi - lo < 1e-12:
            break
    return 0.5 * (lo + hi)


def expected_tanh_given_x(x: float, p: ModelParams) -> tuple[float, float]:
    """Mean saturated feedback under the trend's conditional law.

    Returns ``(exact, linearised)``.  The exact value is a ratio of two
    Gaussian-tail weights,

        (A1 - A2)/(A1 + A2),
        A_i = exp(±2*x*beta*kappa/(alpha*sigma_n**2))
              * (1 + erf((beta ± x*kappa)/(sqrt(alpha)*sigma_n))),

    computed as ``tanh((log A1 - log A2)/2)`` with ``log(1+erf)`` from the
    normal log-CDF so that large arguments neither overflow nor lose the
    tail.  The linearised slope is
    ``(2*kappa*x/beta) * (theta**2 + theta*exp(-theta**2)
    / (sqrt(pi)*(1+erf(theta))))``.

    A warning is emitted when ``gamma*sigma_n*sqrt(alpha) < 3``: the
    derivation replaces ``tanh`` by ``sign`` inside the trend average, which
    needs the trend excursions to reach deep saturation.
    """
    if p.sigma_n <= 0.0:
        raise ZeroDivisionError("requires sigma_n > 0")
    sat = p.gamma * p.sigma_n * math.sqrt(p.alpha)
    if sat < 3.0:
        warnings.warn(
            f"gamma*sigma_n*sqrt(alpha) = {sat:.3g} < 3: saturation assumption weak",
            RuntimeWarning,
            stacklevel=2,
        )
    theta = derive_params(p).theta
    scale = math.sqrt(p.alpha) * p.sigma_n
    shift = 2.0 * x * p.beta * p.kappa / (p.alpha * p.sigma_n**2)
    # log(1 + erf(z)) = log(2) + log Phi(z*sqrt(2)); the log(2) cancels in the ratio
    log_a1 = shift + log_ndtr((p.beta + x * p.kappa) / scale * math.sqrt(2.0))
    log_a2 = -shift + log_ndtr((p.beta - x * p.kappa) / scale * math.sqrt(2.0))
    exact = math.tanh(0.5 * (log_a1 - log_a2))
    slope = (2.0 * p.kappa / p.beta) * (
        theta**2 + theta * math.exp(-(theta**2)) / (_SQRT_PI * (1.0 + math.erf(theta)))
    )
    return exact, slope * x


def sigma_x_sq(p: ModelParams) -> float:
    """Quasi-static mispricing noise budget.

    ``sigma_n**2 * (1 + xi_sq + 4*theta/sqrt(pi) + 2*ln(2)*theta**2)``: the
    white flows plus the feedback-noise cross term and the telegraph term.
    """
    d = derive_params(p)
    return p.sigma_n**2 * (
        1.0 + d.xi_sq + 4.0 * d.theta / _SQRT_PI + 2.0 * _LN2 * d.theta**2
    )


def quasi_static_x_density(x, p: ModelParams):
    """Gaussian quasi-static law of the mispricing, variance
    ``sigma_x_sq/(2*Z*kappa)``.

    Raises
    ------
    NoGaussianDensity
        If ``Z(theta) <= 0``: the linearised restoring force no longer
        confines the mispricing and no Gaussian stationary law exists.
    """
    theta = derive_params(p).theta
    z = z_of_theta(theta)
    if z <= 0.0:
        raise NoGaussianDensity(
            f"Z(theta) = {z:.6g} <= 0 at theta = {theta:.6g}: no Gaussian law"
        )
    var = sigma_x_sq(p) / (2.0 * z * p.kappa)
    x = np.asarray(x, dtype=float)
    out = np.exp(-0.5 * x**2 / var) / math.sqrt(2.0 * math.pi * var)
    return out if out.ndim else float(out)


def _log_trend_shape(m: np.ndarray, x: float, p: ModelParams) -> np.ndarray:
    an2 = p.alpha * p.sigma_n**2
    return (
        (2.0 * p.beta / (an2 * p.gamma)) * log_cosh(p.gamma * m)
        - m**2 / an2
        + 2.0 * p.kappa * m * x / an2
    )


def conditional_density_m_given_x(m, x: float, p: ModelParams):
    """Trend density at frozen mispricing ``x``, normalised by quadrature.

    The shape is evaluated in log space and the normalisation integral is
    computed adaptively after shifting out the log-maximum, so strongly
    bimodal shapes with huge dynamic range are handled exactly.
    """
    if p.gamma <= 0.0 or p.sigma_n <= 0.0:
        raise UnsupportedRegime("requires gamma > 0 and sigma_n > 0")
    m_arr = np.asarray(m, dtype=float)
    # peaks satisfy m = beta*tanh(gamma*m) + kappa*x, bounded by beta + kappa|x|
    half_range = p.beta + p.kappa * abs(x) + 10.0 * p.sigma_n * math.sqrt(p.alpha)
    probe = np.linspace(-half_range, half_range, 2001)
    log_probe = _log_trend_shape(probe, x, p)
    shift = float(log_probe.max())

    def f(mm):
        return math.exp(float(_log_trend_shape(np.asarray(mm), x, p)) - shift)

    peaks = probe[np.argmax(log_probe)]
    norm, _ = integrate.quad(
        f,
        -half_range,
        half_range,
        points=sorted({-abs(float(peaks)), 0.0, abs(float(peaks))}),
        limit=300,
        epsabs=0.0,
        epsrel=1e-11,
    )
    out = np.exp(_log_trend_shape(m_arr, x, p) - shift) / norm
    return out if out.ndim else float(out)


def trend_marginal_density(m_grid, p: ModelParams):
    """Stationary trend density on a grid, renormalised over that grid.

    The analytic shape combines the conditional trend law with the Gaussian
    quasi-static mispricing: ``cosh(gamma*M)**(2*theta**2/(beta*gamma))
    * exp(-M**2 * Z / (sigma_x_sq*kappa + Z*alpha*sigma_n**2))``.  Its
    closed-form prefactor is only approximate, so the returned values are
    normalised numerically over ``m_grid`` — mass outside the grid is
    deliberately ignored, choose the grid to cover ``±(beta + few sigma)``.
    """
    if p.gamma <= 0.0 or p.sigma_n <= 0.0:
        raise UnsupportedRegime("requires gamma > 0 and sigma_n > 0")
    grid = np.asarray(m_grid, dtype=float)
    if grid.ndim != 1 or grid.size < 8:
        raise ValueError("m_grid must be a 1-D grid with at least 8 points")
    d = derive_params(p)
    z = z_of_theta(d.theta)
    denom = sigma_x_sq(p) * p.kappa + z * p.alpha * p.sigma_n**2
    if denom == 0.0:
        raise UnsupportedRegime("degenerate trend variance: adjust parameters")
    exponent = 2.0 * d.theta**2 / (p.beta * p.gamma)
    logq = exponent * log_cosh(p.gamma * grid) - grid**2 * z / denom
    logq -= logq.max()
    values = np.exp(logq)
    norm = float(np.trapezoid(values, grid))
    if norm <= 0.0 or not math.isfinite(norm):
        raise UnsupportedRegime("trend marginal is not normalisable on this grid")
    return values / norm


@dataclass(frozen=True)
class TrendBimodality:
    """Bimodality diagnostics for the stationary trend.

    ``curvature`` is the log-density second derivative at M = 0,
    ``2*beta*gamma/(alpha*sigma_n**2) - 2*Z/(sigma_x_sq*kappa +
    Z*alpha*sigma_n**2)``; a positive value means a dip at the origin.
    ``by_saturation`` is the frozen-mispricing criterion ``beta*gamma > 1``.
    """

    curvature: float
    by_curvature: bool
    by_saturation: bool


def trend_bimodality(p: ModelParams) -> TrendBimodality:
    """Evaluate both trend-bimodality criteria."""
    d = derive_params(p)
    z = z_of_theta(d.theta)
    denom = sigma_x_sq(p) * p.kappa + z * p.alpha * p.sigma_n**2
    if denom == 0.0:
        raise UnsupportedRegime("degenerate trend variance: adjust parameters")
    curvature = 2.0 * p.beta * p.gamma / (p.alpha * p.sigma_n**2) - 2.0 * z / denom
    return TrendBimodality(
        curvature=curvature,
        by_curvature=curvature > 0.0,
        by_saturation=p.beta * p.gamma > 1.0,
    )


def arrhenius_crossing_time(p: ModelParams) -> float:
    """Mean residence time of the trend in one lobe, ``exp(theta**2)/alpha``.

    Raises
    ------
    NoBarrier
        If ``beta*gamma <= 1``: the conditional trend law is unimodal and
        there is no barrier to cross.
    """
    if p.beta * p.gamma <= 1.0:
        raise NoBarrier(f"beta*gamma = {p.beta * p.gamma:.6g} <= 1: no trend barrier")
    theta = derive_params(p).theta
    return math.exp(theta**2) / p.alpha


@dataclass(frozen=True)
class StrongCouplingReport:
    """One-stop summary of the strong-coupling predictions.

    ``kappa_eff = kappa*Z`` can be negative, signalling the loss of the
    Gaussian quasi-static law.  ``crossing_time`` is ``None`` when the trend
    has no barrier.  ``quasi_static_score = kappa * crossing_time`` measures
    validity of the quasi-static treatment (small is good: the mispricing
    should barely move between trend flips).
    """

    theta: float
    z_value: float
    sigma_x_sq: float
    kappa_eff: float
    crossing_time: float | None
    quasi_static_score: float | None
    trend: TrendBimodality
    mispricing_modality: ModalityVerdict


def strong_coupling_report(p: ModelParams) -> StrongCouplingReport:
    """Assemble every strong-coupling diagnostic for one parameter set."""
    theta = derive_params(p).theta
    z = z_of_theta(theta)
    try:
        t_cross: float | None = arrhenius_crossing_time(p)
    except NoBarrier:
        t_cross = None
    verdict = predict_modality(p, Regime.STRONG_COUPLING)
    return StrongCouplingReport(
        theta=theta,
        z_value=z,
        sigma_x_sq=sigma_x_sq(p),
        kappa_eff=p.kappa * z,
        crossing_time=t_cross,
        quasi_static_score=None if t_cross is None else p.kappa * t_cross,
        trend=trend_bimodality(p),
        mispricing_modality=verdict,
    )

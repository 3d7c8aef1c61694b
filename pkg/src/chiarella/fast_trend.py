"""Stationary mispricing law when the trend relaxes much faster than prices.

With ``alpha >> kappa`` the saturated trend behaves like a telegraph signal
riding on the sign of a fast Ornstein-Uhlenbeck process; its autocovariance
is ``(2/pi)*arcsin(exp(-alpha*tau))``.  At weak coupling
``theta = beta/(sigma_n*sqrt(alpha)) <~ 0.3`` the feedback merely rescales
the rates (``kappa_eff``, ``beta_eff``) and inflates the mispricing
variance; the stationary law stays Gaussian.  This module evaluates the
exact and truncated variance predictions, the telegraph autocovariance, and
the two expansion identities the derivation rests on (a Gamma-function
ratio and a Gaussian-smoothed ``sech**2`` expectation).
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np
from scipy import integrate
from scipy.special import gammaln

from .params import ModelParams, derive_params

__all__ = [
    "telegraph_autocov",
    "effective_params",
    "FastTrendMoments",
    "variance_x",
    "weak_coupling_density",
    "gamma_ratio_expansion",
    "NovikovExpectation",
    "novikov_cosh_expectation",
    "regime_warnings",
]

_SQRT_PI = math.sqrt(math.pi)


def telegraph_autocov(tau, alpha: float):
    """Autocovariance of the sign of a fast Ornstein-Uhlenbeck trend.

    ``(2/pi) * arcsin(exp(-alpha*|tau|))``: equals 1 at zero lag, 1/3 at lag
    ``ln(2)/alpha``, and decays like ``(2/pi)*exp(-alpha*tau)`` at long lags.
    """
    tau = np.asarray(tau, dtype=float)
    out = (2.0 / math.pi) * np.arcsin(np.exp(-alpha * np.abs(tau)))
    return out if out.ndim else float(out)


def regime_warnings(p: ModelParams) -> tuple[str, ...]:
    """Check the fast-trend assumptions; returns warning strings (may be empty).

    Violations warn rather than fail: the formulas degrade smoothly, and
    callers may legitimately probe the edge of the regime.
    """
    notes = []
    if p.alpha / p.kappa < 50.0:
        notes.append(
            f"time-scale separation alpha/kappa = {p.alpha / p.kappa:.3g} < 50"
        )
    theta = derive_params(p).theta
    if theta > 0.3:
        notes.append(f"coupling theta = {theta:.3g} > 0.3 exceeds the weak regime")
    notes = tuple(notes)
    for note in notes:
        warnings.warn(note, RuntimeWarning, stacklevel=3)
    return notes


def effective_params(p: ModelParams) -> tuple[float, float]:
    """Feedback-renormalised rates ``(kappa_eff, beta_eff)``.

    The fast trend spends part of its time aligned with the mispricing,
    which strengthens both the restoring force and the feedback by the same
    factor ``1 + 2*theta/sqrt(pi)``.
    """
    theta = derive_params(p).theta
    boost = 1.0 + 2.0 * theta / _SQRT_PI
    return p.kappa * boost, p.beta * boost


@dataclass(frozen=True)
class FastTrendMoments:
    """Variance decomposition of the weak-coupling stationary law.

    ``a_sq`` is the contribution of the telegraph-driven component, ``ab``
    the cross term with the white-noise component, and ``x_sq_exact`` their
    total together with the white-noise variance ``sigma_sq/(2*kappa_eff)``.
    ``x_sq_truncated`` is the same total expanded to second order in
    ``theta``.  ``warnings`` carries regime-guard notes.
    """

    kappa_eff: float
    beta_eff: float
    a_sq: float
    ab: float
    x_sq_exact: float
    x_sq_truncated: float
    warnings: tuple[str, ...] = ()


def variance_x(p: ModelParams) -> FastTrendMoments:
    """Exact and truncated stationary mispricing variance at weak coupling.

    The telegraph term integrates to a ratio of Gamma functions,

        a_sq = beta_eff**2/(sqrt(pi)*kappa_eff**2)
               * (sqrt(pi) - G((alpha+kappa_eff)/(2*alpha))
                            / G((2*alpha+kappa_eff)/(2*alpha))),

    evaluated via ``gammaln`` for accuracy; the cross term is
    ``ab = beta_eff*sigma_n*sqrt(alpha/pi) / (kappa_eff*(alpha+kappa_eff))``.
    The truncated form replaces these by their ``O(theta**2)`` expansion
    ``sigma_sq/(2*kappa_eff) + 2*alpha*sigma_n**2*theta
    / (sqrt(pi)*kappa*(alpha+kappa_eff)) + ln(2)*sigma_n**2*theta**2/kappa``.
    """
    notes = regime_warnings(p)
    theta = derive_params(p).theta
    kappa_eff, beta_eff = effective_params(p)
    s2 = p.sigma_sq
    sn2 = p.sigma_n**2
    al = p.alpha

    gamma_ratio = math.exp(
        gammaln((al + kappa_eff) / (2.0 * al)) - gammaln((2.0 * al + kappa_eff) / (2.0 * al))
    )
    a_sq = beta_eff**2 / (_SQRT_PI * kappa_eff**2) * (_SQRT_PI - gamma_ratio)
    ab = beta_eff * p.sigma_n * math.sqrt(al / math.pi) / (kappa_eff * (al + kappa_eff))
    x_sq_exact = a_sq + s2 / (2.0 * kappa_eff) + 2.0 * ab
    x_sq_truncated = (
        s2 / (2.0 * kappa_eff)
        + 2.0 * al * sn2 * theta / (_SQRT_PI * p.kappa * (al + kappa_eff))
        + math.log(2.0) * sn2 * theta**2 / p.kappa
    )
    return FastTrendMoments(
        kappa_eff=kappa_eff,
        beta_eff=beta_eff,
        a_sq=a_sq,
        ab=ab,
        x_sq_exact=x_sq_exact,
        x_sq_truncated=x_sq_truncated,
        warnings=notes,
    )


def weak_coupling_density(x, p: ModelParams):
    """Gaussian stationary density with the exact weak-coupling variance."""
    var = variance_x(p).x_sq_exact
    x = np.asarray(x, dtype=float)
    out = np.exp(-0.5 * x**2 / var) / math.sqrt(2.0 * math.pi * var)
    return out if out.ndim else float(out)


def gamma_ratio_expansion(eps: float) -> tuple[float, float]:
    """Gamma-ratio identity underlying the truncated variance.

    Returns ``(exact, first_order)`` where ``exact = G(1/2+eps)/G(1+eps)``
    and ``first_order = sqrt(pi)*(1 - 2*ln(2)*eps)``; the difference is
    ``O(eps**2)``.  Requires ``0 <= eps < 0.5``.
    """
    if not 0.0 <= eps < 0.5:
        raise ValueError(f"eps must be in [0, 0.5), got {eps}")
    exact = math.exp(gammaln(0.5 + eps) - gammaln(1.0 + eps))
    first = _SQRT_PI * (1.0 - 2.0 * math.log(2.0) * eps)
    return exact, first


class NovikovExpectation(NamedTuple):
    leading: float
    quadrature: float


def novikov_cosh_expectation(p: ModelParams) -> NovikovExpectation:
    """Gaussian expectation of ``sech**2`` over the saturated trend.

    For ``X ~ N(0, w)`` with ``w = gamma**2*alpha*sigma_n**2/2`` the
    expectation ``E[sech(X)**2]`` has leading behaviour ``sqrt(2/(pi*w))``
    (equivalently ``2/(gamma*sigma_n*sqrt(pi*alpha))``); the relative
    correction is ``O(1/w)``.  Returns the leading term alongside an
    adaptive-quadrature evaluation of the exact expectation.
    """
    w = derive_params(p).w
    if w <= 0.0:
        raise ZeroDivisionError("requires gamma > 0 and sigma_n > 0")
    leading = math.sqrt(2.0 / (math.pi * w))
    sd = math.sqrt(w)

    def f(u):
        return (1.0 / math.cosh(u)) ** 2 * math.exp(-0.5 * u * u / w) / (
            sd * math.sqrt(2.0 * math.pi)
        )

    # sech**2 truncates the integrand by ~1e-39 beyond |u| = 45
    hi = min(45.0, 8.0 * sd)
    value, _ = integrate.quad(f, -hi, hi, limit=200, epsabs=1e-16, epsrel=1e-12)
    return NovikovExpectation(leading=leading, quadrature=value)

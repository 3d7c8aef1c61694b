"""Uniform front-end over the per-regime stationary densities.

Each analytic law is wrapped as an :class:`AnalyticDensity` carrying a
stable regime tag, the variable it describes, and validity metadata, so the
CLI and the comparison metrics can treat all regimes alike.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from . import fast_trend, linear, slow_trend, strong_coupling
from .params import ModelParams, Regime, derive_params

__all__ = ["AnalyticDensity", "analytic_density", "REGIME_TAGS"]

# regime name (CLI) -> density tag (metadata)
REGIME_TAGS = {
    "linear": "linear-gaussian",
    "slow-trend": "gaussian-cosh",
    "fast-trend": "fast-trend-gaussian",
    "strong-coupling": "strong-coupling-quasi-static",
    "trend-marginal": "trend-marginal",
}


@dataclass(frozen=True)
class AnalyticDensity:
    """A stationary density with provenance.

    ``normalised`` distinguishes laws with exact closed-form mass from the
    trend marginal, whose prefactor is only approximate: the latter must be
    evaluated through :meth:`pdf_grid`, which renormalises over the grid.
    """

    tag: str
    variable: str  # "delta" or "m"
    params: ModelParams
    _eval: Callable[[np.ndarray], np.ndarray]
    normalised: bool = True
    meta: dict = field(default_factory=dict)

    def pdf(self, x):
        """Pointwise density; only for exactly normalised laws."""
        if not self.normalised:
            raise ValueError(
                f"{self.tag} has no pointwise normalisation; use pdf_grid()"
            )
        return self._eval(np.asarray(x, dtype=float))

    def pdf_grid(self, grid) -> np.ndarray:
        """Density evaluated on a 1-D grid (renormalising if necessary)."""
        grid = np.asarray(grid, dtype=float)
        values = np.asarray(self._eval(grid), dtype=float)
        if not self.normalised:
            values = values / np.trapezoid(values, grid)
        return values


def analytic_density(p: ModelParams, regime: str | Regime) -> AnalyticDensity:
    """Build the stationary law for a named regime.

    ``regime`` accepts the CLI spellings ``linear``, ``slow-trend``,
    ``fast-trend``, ``strong-coupling`` (all mispricing laws) and
    ``trend-marginal`` (trend law).  Regime-specific validity diagnostics
    land in ``meta``; regime-violating parameters raise the corresponding
    error (e.g. no Gaussian law beyond the strong-coupling threshold).
    """
    if isinstance(regime, Regime):
        regime = {
            Regime.LINEAR: "linear",
            Regime.SLOW_TREND: "slow-trend",
            Regime.FAST_TREND: "fast-trend",
            Regime.STRONG_COUPLING: "strong-coupling",
        }[regime]
    if regime not in REGIME_TAGS:
        raise ValueError(
            f"unknown regime {regime!r}; expected one of {sorted(REGIME_TAGS)}"
        )
    tag = REGIME_TAGS[regime]

    if regime == "linear":
        validity = linear.linear_validity(p)
        cov = linear.lyapunov_covariance(p)
        return AnalyticDensity(
            tag=tag,
            variable="delta",
            params=p,
            _eval=lambda x: linear.marginal_delta_density(x, p),
            meta={
                "variance": float(cov[0, 0]),
                "gamma_sigma_m": validity.gamma_sigma_m,
                "linear_valid": validity.is_valid,
            },
        )
    if regime == "slow-trend":
        verdict = slow_trend.locate_modes(p)
        return AnalyticDensity(
            tag=tag,
            variable="delta",
            params=p,
            _eval=lambda x: slow_trend.gaussian_cosh_density(x, p),
            meta={
                "modality": verdict.modality.value,
                "modes": list(verdict.modes),
                "n_exponent": derive_params(p).n_exponent,
            },
        )
    if regime == "fast-trend":
        moments = fast_trend.variance_x(p)
        return AnalyticDensity(
            tag=tag,
            variable="delta",
            params=p,
            _eval=lambda x: fast_trend.weak_coupling_density(x, p),
            meta={
                "variance": moments.x_sq_exact,
                "variance_truncated": moments.x_sq_truncated,
                "warnings": list(moments.warnings),
            },
        )
    if regime == "strong-coupling":
        report = strong_coupling.strong_coupling_report(p)
        # raises NoGaussianDensity beyond the threshold before we build the wrapper
        strong_coupling.quasi_static_x_density(0.0, p)
        return AnalyticDensity(
            tag=tag,
            variable="delta",
            params=p,
            _eval=lambda x: strong_coupling.quasi_static_x_density(x, p),
            meta={
                "theta": report.theta,
                "z_value": report.z_value,
                "quasi_static_score": report.quasi_static_score,
                "variance": strong_coupling.sigma_x_sq(p)
                / (2.0 * report.z_value * p.kappa),
            },
        )
    # trend-marginal
    report = strong_coupling.strong_coupling_report(p)
    return AnalyticDensity(
        tag=tag,
        variable="m",
        params=p,
        _eval=lambda m: strong_coupling.trend_marginal_density(m, p)
        if np.ndim(m) == 1 and np.size(m) >= 8
        else _reject_pointwise(),
        normalised=False,
        meta={
            "theta": report.theta,
            "z_value": report.z_value,
            "trend_bimodal_by_curvature": report.trend.by_curvature,
            "trend_bimodal_by_saturation": report.trend.by_saturation,
        },
    )


def _reject_pointwise():
    raise ValueError("trend-marginal density requires a grid of >= 8 points")

"""Stationary law of the linearised dynamics.

For ``gamma * |trend|`` small the saturating feedback is effectively linear
and the (mispricing, trend) pair is an Ornstein-Uhlenbeck process with drift
matrix ``A`` and diffusion matrix ``D``.  The stationary covariance solves
``A @ S + S @ A.T + D = 0`` and is available in closed form; this module
provides it together with the implied Gaussian densities, a validity
diagnostic for the linearisation, and a residual check that plugs the
closed-form covariance back into the stationary Fokker-Planck equation.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .errors import NoStationaryDistribution, SingularCovariance
from .params import ModelParams

__all__ = [
    "drift_matrix",
    "diffusion_matrix",
    "lyapunov_covariance",
    "joint_density",
    "marginal_delta_density",
    "FpeResiduals",
    "fpe_residuals",
    "LinearValidity",
    "linear_validity",
]


def drift_matrix(p: ModelParams) -> np.ndarray:
    """Linearised drift of (mispricing, trend) around the origin."""
    bg = p.beta * p.gamma
    return np.array(
        [
            [-p.kappa, bg],
            [-p.alpha * p.kappa, p.alpha * (bg - 1.0)],
        ]
    )


def diffusion_matrix(p: ModelParams) -> np.ndarray:
    """Diffusion matrix ``B @ B.T`` of the linearised pair.

    The trend increment reuses the noise-trader shock that moves the
    mispricing, which is why the off-diagonal entry is ``alpha*sigma_n**2``
    rather than zero: fundamental noise cancels out of the trend exactly.
    """
    s2 = p.sigma_sq
    sn2 = p.sigma_n**2
    return np.array(
        [
            [s2, p.alpha * sn2],
            [p.alpha * sn2, p.alpha**2 * sn2],
        ]
    )


def lyapunov_covariance(p: ModelParams) -> np.ndarray:
    """Closed-form stationary covariance of the linearised pair.

    Returns the symmetric 2x2 matrix ``S`` with ``S[0, 0] = Var[delta]``,
    ``S[1, 1] = Var[M]`` and ``S[0, 1] = Cov[delta, M]``:

    ``Var[delta] = ((kappa + alpha*(bg-1)**2)*s2 + alpha*bg*(2-bg)*sn2)
    / (2*kappa*margin)``, ``Var[M] = alpha*(kappa*s2 + (alpha-kappa)*sn2)
    / (2*margin)`` and ``Cov = alpha*((bg-1)*s2 + (2-bg)*sn2) / (2*margin)``
    where ``bg = beta*gamma``, ``s2 = sigma_n**2 + sigma_v**2``,
    ``sn2 = sigma_n**2`` and ``margin = alpha*(1-bg) + kappa``.

    Raises
    ------
    NoStationaryDistribution
        If ``margin <= 0`` (the fixed point is unstable, so the variance
        integral diverges).
    """
    bg = p.beta * p.gamma
    margin = p.alpha * (1.0 - bg) + p.kappa
    if margin <= 0.0:
        raise NoStationaryDistribution(
            f"stability margin alpha*(1-beta*gamma)+kappa = {margin:.6g} <= 0"
        )
    s2 = p.sigma_sq
    sn2 = p.sigma_n**2
    var_d = ((p.kappa + p.alpha * (bg - 1.0) ** 2) * s2 + p.alpha * bg * (2.0 - bg) * sn2) / (
        2.0 * p.kappa * margin
    )
    var_m = p.alpha * (p.kappa * s2 + (p.alpha - p.kappa) * sn2) / (2.0 * margin)
    cov = p.alpha * ((bg - 1.0) * s2 + (2.0 - bg) * sn2) / (2.0 * margin)
    return np.array([[var_d, cov], [cov, var_m]])


def _inverse_covariance(p: ModelParams) -> tuple[float, float, float]:
    """Entries (a, b, c) of the inverse stationary covariance.

    The stationary density is ``exp(-(a*d**2 + 2*b*d*m + c*m**2)/2)`` up to
    normalisation.
    """
    cov = lyapunov_covariance(p)
    det = cov[0, 0] * cov[1, 1] - cov[0, 1] ** 2
    if not math.isfinite(det) or det <= 0.0:
        raise SingularCovariance(f"covariance determinant {det:.6g} is not positive")
    a = cov[1, 1] / det
    b = -cov[0, 1] / det
    c = cov[0, 0] / det
    return a, b, c


def joint_density(delta, m, p: ModelParams):
    """Stationary Gaussian density of (mispricing, trend) at ``(delta, m)``.

    Accepts scalars or broadcastable arrays.
    """
    a, b, c = _inverse_covariance(p)
    det = 1.0 / (a * c - b * b)
    delta = np.asarray(delta, dtype=float)
    m = np.asarray(m, dtype=float)
    quad = a * delta**2 + 2.0 * b * delta * m + c * m**2
    out = np.exp(-0.5 * quad) / (2.0 * math.pi * math.sqrt(det))
    return out if out.ndim else float(out)

def marginal_delta_density(delta, p: ModelParams):
    """Stationary Gaussian density of the mispricing alone."""
    var = lyapunov_covariance(p)[0, 0]
    delta = np.asarray(delta, dtype=float)
    out = np.exp(-0.5 * delta**2 / var) / math.sqrt(2.0 * math.pi * var)
    return out if out.ndim else float(out)


class FpeResiduals(NamedTuple):
    """Normalised coefficients left over when the closed-form covariance is
    substituted into the stationary Fokker-Planck equation.

    Grouping the equation by monomials in (mispricing d, trend m) yields four
    coefficients that must all vanish; each is reported divided by the
    largest magnitude among its constituent terms, so values are relative.
    """

    const: float
    delta_sq: float
    m_sq: float
    cross: float


def _normalised(terms: list[float]) -> float:
    scale = max(abs(t) for t in terms)
    if scale == 0.0:
        return 0.0
    return math.fsum(terms) / scale


def fpe_residuals(p: ModelParams) -> FpeResiduals:
    """Verify the closed-form covariance against the stationary FPE.

    Substituting the Gaussian ansatz with inverse covariance entries
    ``(a, b, c)`` into the stationary Fokker-Planck equation of the
    linearised dynamics and collecting the constant, ``d**2``, ``m**2`` and
    ``d*m`` coefficients gives four expressions that vanish identically for
    the true covariance.  They are evaluated term by term and normalised by
    the largest constituent term, so a correct covariance yields residuals
    at rounding level regardless of parameter scale.

    Raises
    ------
    SingularCovariance
        If the closed-form covariance cannot be inverted.
    """
    a, b, c = _inverse_covariance(p)
    bg = p.beta * p.gamma
    s2 = p.sigma_sq
    sn2 = p.sigma_n**2
    al, ka = p.alpha, p.kappa

    const = _normalised(
        [ka, al * (1.0 - bg), -0.5 * s2 * a, -al * sn2 * b, -0.5 * al**2 * sn2 * c]
    )
    delta_sq = _normalised(
        [
            -ka * a,
            -al * ka * b,
            0.5 * s2 * a * a,
            al * sn2 * a * b,
            0.5 * al**2 * sn2 * b * b,
        ]
    )
    m_sq = _normalised(
        [
            bg * b,
            -al * (1.0 - bg) * c,
            0.5 * s2 * b * b,
            al * sn2 * b * c,
            0.5 * al**2 * sn2 * c * c,
        ]
    )
    cross = _normalised(
        [
            -ka * b,
            bg * a,
            -al * ka * c,
            -al * (1.0 - bg) * b,
            s2 * a * b,
            al * sn2 * (a * c + b * b),
            al**2 * sn2 * b * c,
        ]
    )
    return FpeResiduals(const, delta_sq, m_sq, cross)


@dataclass(frozen=True)
class LinearValidity:
    """Self-consistency diagnostic for the linearisation.

    The linear law is trustworthy when the trend excursions stay inside the
    linear part of the saturation, i.e. ``gamma_sigma_m << 1``.  The flag
    uses 0.1 as the practical cutoff.  ``large_alpha_sq`` is the fast-trend
    shortcut ``gamma**2*alpha*sigma_n**2 / (2*(1-beta*gamma))`` for the
    squared criterion (infinite when ``beta*gamma >= 1``).
    """

    gamma_sigma_m: float
    is_valid: bool
    large_alpha_sq: float


def linear_validity(p: ModelParams) -> LinearValidity:
    """Report whether the linearised stationary law is self-consistent."""
    var_m = lyapunov_covariance(p)[1, 1]
    gsm = p.gamma * math.sqrt(var_m)
    bg = p.beta * p.gamma
    if bg < 1.0:
        shortcut = p.gamma**2 * p.alpha * p.sigma_n**2 / (2.0 * (1.0 - bg))
    else:
        shortcut = math.inf
    return LinearValidity(gamma_sigma_m=gsm, is_valid=gsm < 0.1, large_alpha_sq=shortcut)

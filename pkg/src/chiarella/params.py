"""Model parameters, derived scales, and analytic regime verdicts.

The model couples three state variables: log-price, a trend estimate built
from an exponential moving average of returns, and a log-fundamental value
following a random walk with drift.  Because the drift cancels out of the
mispricing ``delta = logprice - logvalue``, all stationary behaviour is
controlled by the six rates collected in :class:`ModelParams`:

``kappa``    mean-reversion rate of the mispricing (value traders),
``beta``     strength of the saturating trend feedback (trend followers),
``gamma``    steepness of the saturation,
``alpha``    memory rate of the trend estimate,
``sigma_n``  intensity of the noise-trader flow,
``sigma_v``  intensity of the fundamental-value noise,
``g``        fundamental drift (irrelevant to stationary statistics).

This module owns the parameter containers, the dimensionless combinations
that organise the phase diagram, the deterministic (Hopf) stability
classification, and the dispatcher that predicts whether the stationary
mispricing density has one peak or two in each analytically tractable
regime.
"""

from __future__ import annotations

import enum
import json
import math
from dataclasses import dataclass, field
from functools import lru_cache

__all__ = [
    "ModelParams",
    "DerivedParams",
    "Phase",
    "PhaseVerdict",
    "Modality",
    "VerdictSource",
    "ModalityVerdict",
    "Regime",
    "derive_params",
    "classify_deterministic_phase",
    "predict_modality",
]

_PARAM_KEYS = ("kappa", "beta", "gamma", "alpha", "sigma_n", "sigma_v", "g")


@dataclass(frozen=True)
class ModelParams:
    """Immutable bundle of model rates, validated at construction.

    Raises
    ------
    ValueError
        If any rate is negative or non-finite, if ``kappa`` or ``alpha``
        is not strictly positive, or if both noise intensities vanish
        together with no way to normalise (``sigma_n**2 + sigma_v**2 == 0``
        is allowed only for purely deterministic experiments).
    """

    kappa: float
    beta: float
    gamma: float
    alpha: float
    sigma_n: float
    sigma_v: float
    g: float = 0.0

    def __post_init__(self):
        for name in _PARAM_KEYS:
            value = getattr(self, name)
            if not isinstance(value, (int, float)) or not math.isfinite(value):
                raise ValueError(f"{name} must be a finite number, got {value!r}")
            object.__setattr__(self, name, float(value))
        if self.kappa <= 0.0:
            raise ValueError(f"kappa must be > 0, got {self.kappa}")
        if self.alpha <= 0.0:
            raise ValueError(f"alpha must be > 0, got {self.alpha}")
        for name in ("beta", "gamma", "sigma_n", "sigma_v"):
            if getattr(self, name) < 0.0:
                raise ValueError(f"{name} must be >= 0, got {getattr(self, name)}")

    @property
    def sigma_sq(self) -> float:
        """Total mispricing noise variance rate ``sigma_n**2 + sigma_v**2``."""
        return self.sigma_n**2 + self.sigma_v**2

    def to_dict(self) -> dict[str, float]:
        """Flat mapping with exactly the keys accepted by :meth:`from_dict`."""
        return {name: getattr(self, name) for name in _PARAM_KEYS}

    @classmethod
    def from_dict(cls, data: dict) -> "ModelParams":
        unknown = set(data) - set(_PARAM_KEYS)
        if unknown:
            raise ValueError(f"unknown parameter keys: {sorted(unknown)}")
        missing = set(_PARAM_KEYS) - {"g"} - set(data)
        if missing:
            raise ValueError(f"missing parameter keys: {sorted(missing)}")
        return cls(**{k: float(v) for k, v in data.items()})

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "ModelParams":
        return cls.from_dict(json.loads(text))

    def replace(self, **changes) -> "ModelParams":
        current = self.to_dict()
        current.update(changes)
        return ModelParams(**current)


@dataclass(frozen=True)
class DerivedParams:
    """Dimensionless combinations of the model rates.

    ``theta`` and ``xi_sq`` require ``sigma_n > 0``; accessing them on a
    parameter set with ``sigma_n == 0`` raises :class:`ZeroDivisionError`.
    """

    sigma_sq: float
    n_exponent: float  # 2*beta / (alpha*gamma*sigma_sq), cosh exponent
    w: float  # gamma**2 * alpha * sigma_n**2 / 2, squared trend-noise scale
    _theta: float | None = field(default=None, repr=False)
    _xi_sq: float | None = field(default=None, repr=False)

    @property
    def theta(self) -> float:
        """Trend-to-noise coupling strength ``beta / (sigma_n * sqrt(alpha))``."""
        if self._theta is None:
            raise ZeroDivisionError("theta is undefined when sigma_n == 0")
        return self._theta

    @property
    def xi_sq(self) -> float:
        """Fundamental-to-trader noise ratio ``sigma_v**2 / sigma_n**2``."""
        if self._xi_sq is None:
            raise ZeroDivisionError("xi_sq is undefined when sigma_n == 0")
        return self._xi_sq


@lru_cache(maxsize=None)
def derive_params(p: ModelParams) -> DerivedParams:
    """Compute the dimensionless scales of a parameter set.

    Parameters with ``gamma == 0`` or ``sigma_sq == 0`` have no finite cosh
    exponent; ``n_exponent`` is ``inf`` in that case.
    """
    sigma_sq = p.sigma_sq
    denom = p.alpha * p.gamma * sigma_sq
    n_exponent = (2.0 * p.beta / denom) if denom > 0.0 else math.inf
    w = 0.5 * p.gamma**2 * p.alpha * p.sigma_n**2
    theta = p.beta / (p.sigma_n * math.sqrt(p.alpha)) if p.sigma_n > 0.0 else None
    xi_sq = (p.sigma_v / p.sigma_n) ** 2 if p.sigma_n > 0.0 else None
    return DerivedParams(sigma_sq, n_exponent, w, theta, xi_sq)


class Phase(enum.Enum):
    STABLE_SPIRAL = "stable_spiral"
    LIMIT_CYCLE = "limit_cycle"


@dataclass(frozen=True)
class PhaseVerdict:
    """Deterministic-skeleton classification with its stability margin."""

    phase: Phase
    margin: float  # alpha*(1 - beta*gamma) + kappa; > 0 means stable


def classify_deterministic_phase(p: ModelParams) -> PhaseVerdict:
    """Classify the noise-free dynamics around the fixed point.

    The origin of the (mispricing, trend) plane is a stable focus iff
    ``alpha*(1 - beta*gamma) + kappa > 0``; otherwise the trend feedback
    overwhelms both damping channels and trajectories settle onto a limit
    cycle born in a Hopf bifurcation.
    """
    margin = p.alpha * (1.0 - p.beta * p.gamma) + p.kappa
    phase = Phase.STABLE_SPIRAL if margin > 0.0 else Phase.LIMIT_CYCLE
    return PhaseVerdict(phase=phase, margin=margin)


class Modality(enum.Enum):
    UNIMODAL = "unimodal"
    BIMODAL = "bimodal"


class VerdictSource(enum.Enum):
    ANALYTIC_LINEAR = "analytic_linear"
    ANALYTIC_SLOW_TREND = "analytic_slow_trend"
    ANALYTIC_FAST_TREND = "analytic_fast_trend"
    ANALYTIC_STRONG_COUPLING = "analytic_strong_coupling"
    EMPIRICAL = "empirical"


@dataclass(frozen=True)
class ModalityVerdict:
    """Peak-count verdict for a stationary density.

    ``modes`` holds exactly one location for a unimodal verdict and exactly
    two (sorted) for a bimodal one.  ``note`` carries confidence qualifiers,
    e.g. when a threshold is only a lower bound for the true transition.
    ``curvature`` optionally records the density's second derivative sign
    proxy at the symmetry point.
    """

    modality: Modality
    modes: tuple[float, ...]
    source: VerdictSource
    note: str = ""
    curvature: float | None = None

    def __post_init__(self):
        expected = 1 if self.modality is Modality.UNIMODAL else 2
        if len(self.modes) != expected:
            raise ValueError(
                f"{self.modality.value} verdict requires {expected} mode(s), "
                f"got {len(self.modes)}"
            )
        object.__setattr__(self, "modes", tuple(sorted(float(m) for m in self.modes)))


class Regime(enum.Enum):
    """Analytically tractable corners of parameter space."""

    LINEAR = "linear"  # gamma*|trend| << 1: feedback never saturates
    SLOW_TREND = "slow_trend"  # alpha << kappa: trend is quasi-frozen
    FAST_TREND = "fast_trend"  # alpha >> kappa, weak coupling: trend averages out
    STRONG_COUPLING = "strong_coupling"  # alpha, beta >> kappa


# Confidence qualifier attached to strong-coupling verdicts: the critical
# coupling derived from the quasi-static argument underestimates the true
# onset of bimodality, so a verdict near the threshold is indicative only.
_LOWER_BOUND_NOTE = "threshold is an indicative lower bound for the true onset"


def predict_modality(p: ModelParams, regime: Regime) -> ModalityVerdict:
    """Predict the peak count of the stationary mispricing density.

    Dispatches on ``regime``:

    * ``LINEAR`` and ``FAST_TREND`` laws are Gaussian, hence unimodal at 0.
    * ``SLOW_TREND`` applies the saturated-feedback criterion: two peaks
      iff ``kappa < 2*beta**2 / sigma_sq`` (equality counts as unimodal),
      with locations from the self-consistency equation.
    * ``STRONG_COUPLING`` applies the sign of the effective restoring rate
      ``Z(theta)``: negative means the trend bends the mispricing into two
      lobes near ``±beta/kappa``.  The verdict carries a note because the
      threshold is only a lower bound for the true transition.
    """
    if regime in (Regime.LINEAR, Regime.FAST_TREND):
        source = (
            VerdictSource.ANALYTIC_LINEAR
            if regime is Regime.LINEAR
            else VerdictSource.ANALYTIC_FAST_TREND
        )
        return ModalityVerdict(Modality.UNIMODAL, (0.0,), source)
    if regime is Regime.SLOW_TREND:
        from .slow_trend import locate_modes

        return locate_modes(p)
    if regime is Regime.STRONG_COUPLING:
        from .strong_coupling import theta_critical, z_of_theta

        theta = derive_params(p).theta
        z = z_of_theta(theta)
        if z < 0.0:
            return ModalityVerdict(
                Modality.BIMODAL,
                (-p.beta / p.kappa, p.beta / p.kappa),
                VerdictSource.ANALYTIC_STRONG_COUPLING,
                note=_LOWER_BOUND_NOTE,
            )
        note = _LOWER_BOUND_NOTE if theta > 0.5 * theta_critical() else ""
        return ModalityVerdict(
            Modality.UNIMODAL,
            (0.0,),
            VerdictSource.ANALYTIC_STRONG_COUPLING,
            note=note,
        )
    raise ValueError(f"unknown regime: {regime!r}")

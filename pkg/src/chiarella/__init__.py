"""Simulation and stationary-law toolkit for a noisy trend/value market model.

The package couples a reproducible Euler-Maruyama engine for the
(mispricing, trend) dynamics with the closed-form stationary laws that hold
in the linear, slow-trend, fast-trend and strong-coupling corners of
parameter space, plus the empirical machinery (histograms, smoothing, mode
counting, distances) needed to confront simulation with the formulas.
"""

from .densities import AnalyticDensity, analytic_density
from .empirics import (
    EmpiricalDensity,
    Histogram1D,
    build_histogram,
    count_modes,
    ks_distance,
    l1_distance,
    moments_with_errors,
    smooth,
)
from .engine import (
    FullState,
    ReducedState,
    SimSpec,
    TrajectoryStats,
    default_dt,
    default_stride,
    from_xy,
    simulate,
    step_full,
    step_reduced,
    to_xy,
)
from .errors import (
    BracketFailure,
    ChiarellaError,
    EmptyInput,
    InsufficientData,
    NoBarrier,
    NoGaussianDensity,
    NonFiniteSample,
    NoStationaryDistribution,
    QuadratureFailure,
    SingularCovariance,
    SupportMismatch,
    UnsupportedRegime,
)
from .params import (
    DerivedParams,
    Modality,
    ModalityVerdict,
    ModelParams,
    Phase,
    PhaseVerdict,
    Regime,
    VerdictSource,
    classify_deterministic_phase,
    derive_params,
    predict_modality,
)

__version__ = "0.1.0"

__all__ = [
    "__version__",
    "AnalyticDensity",
    "analytic_density",
    "EmpiricalDensity",
    "Histogram1D",
    "build_histogram",
    "count_modes",
    "ks_distance",
    "l1_distance",
    "moments_with_errors",
    "smooth",
    "FullState",
    "ReducedState",
    "SimSpec",
    "TrajectoryStats",
    "default_dt",
    "default_stride",
    "from_xy",
    "simulate",
    "step_full",
    "step_reduced",
    "to_xy",
    "BracketFailure",
    "ChiarellaError",
    "EmptyInput",
    "InsufficientData",
    "NoBarrier",
    "NoGaussianDensity",
    "NonFiniteSample",
    "NoStationaryDistribution",
    "QuadratureFailure",
    "SingularCovariance",
    "SupportMismatch",
    "UnsupportedRegime",
    "DerivedParams",
    "Modality",
    "ModalityVerdict",
    "ModelParams",
    "Phase",
    "PhaseVerdict",
    "Regime",
    "VerdictSource",
    "classify_deterministic_phase",
    "derive_params",
    "predict_modality",
]

"""Histogram accumulation, density smoothing, and empirical diagnostics.

Simulation output is summarised as fixed-bin histograms plus raw moment
sums; everything downstream (kernel-density smoothing, peak counting,
distances to analytic laws, moment standard errors) works from those
summaries so that runs of any length stay memory-bounded and mergeable.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy.signal import find_peaks

from .errors import EmptyInput, InsufficientData, SupportMismatch
from .params import Modality, ModalityVerdict, VerdictSource

__all__ = [
    "Histogram1D",
    "EmpiricalDensity",
    "build_histogram",
    "smooth",
    "count_modes",
    "l1_distance",
    "ks_distance",
    "MomentEstimate",
    "moments_with_errors",
]


@dataclass(frozen=True)
class Histogram1D:
    """Fixed-bin counting histogram.

    ``edges`` has one more entry than ``counts``.  Bins are uniform; samples
    outside the edge range are dropped (callers track totals separately when
    they care).  Histograms with identical edges can be merged exactly, which
    makes per-path accumulation embarrassingly parallel.
    """

    edges: np.ndarray
    counts: np.ndarray

    def __post_init__(self):
        edges = np.asarray(self.edges, dtype=float)
        counts = np.asarray(self.counts, dtype=np.int64)
        if edges.ndim != 1 or counts.ndim != 1 or edges.size != counts.size + 1:
            raise ValueError("edges must be 1-D with len(counts) + 1 entries")
        if not np.all(np.diff(edges) > 0):
            raise ValueError("edges must be strictly increasing")
        object.__setattr__(self, "edges", edges)
        object.__setattr__(self, "counts", counts)

    @property
    def total(self) -> int:
        return int(self.counts.sum())

    @property
    def centers(self) -> np.ndarray:
        return 0.5 * (self.edges[:-1] + self.edges[1:])

    @property
    def bin_width(self) -> float:
        return float(self.edges[1] - self.edges[0])

    def density(self) -> np.ndarray:
        """Counts normalised to a probability density over the binned range."""
        total = self.total
        if total == 0:
            raise EmptyInput("histogram holds no samples")
        return self.counts / (total * np.diff(self.edges))

    def merge(self, other: "Histogram1D") -> "Histogram1D":
        if not np.array_equal(self.edges, other.edges):
            raise SupportMismatch("cannot merge histograms with different edges")
        return Histogram1D(self.edges, self.counts + other.counts)

    def quantile(self, q: float) -> float:
        """Approximate quantile by linear interpolation of the bin CDF."""
        total = self.total
        if total == 0:
            raise EmptyInput("histogram holds no samples")
        cdf = np.concatenate([[0.0], np.cumsum(self.counts)]) / total
        return float(np.interp(q, cdf, self.edges))

    def mean_std(self) -> tuple[float, float]:
        """Mean and standard deviation of the binned mass (midpoint rule)."""
        dens = self.counts / max(self.total, 1)
        c = self.centers
        mean = float(np.dot(dens, c))
        var = float(np.dot(dens, (c - mean) ** 2))
        return mean, math.sqrt(max(var, 0.0))


def build_histogram(
    samples: np.ndarray,
    n_bins: int = 256,
    hist_range: tuple[float, float] | None = None,
) -> Histogram1D:
    """Bin raw samples into a uniform histogram.

    When ``hist_range`` is not given it defaults to mean ± 6 standard
    deviations of the samples (a degenerate sample set gets a unit-width
    window around its value).

    Raises
    ------
    EmptyInput
        If ``samples`` is empty.
    ValueError
        If ``n_bins < 10``.
    """
    samples = np.asarray(samples, dtype=float).ravel()
    if samples.size == 0:
        raise EmptyInput("no samples to bin")
    if n_bins < 10:
        raise ValueError(f"n_bins must be >= 10, got {n_bins}")
    if hist_range is None:
        mean = float(samples.mean())
        std = float(samples.std())
        if std == 0.0:
            hist_range = (mean - 0.5, mean + 0.5)
        else:
            hist_range = (mean - 6.0 * std, mean + 6.0 * std)
    lo, hi = float(hist_range[0]), float(hist_range[1])
    if not (math.isfinite(lo) and math.isfinite(hi)) or hi <= lo:
        raise ValueError(f"invalid histogram range ({lo}, {hi})")
    counts, edges = np.histogram(samples, bins=n_bins, range=(lo, hi))
    return Histogram1D(edges, counts.astype(np.int64))


@dataclass(frozen=True)
class EmpiricalDensity:
    """Density estimate on a uniform grid, normalised to unit mass.

    ``bandwidth`` records the Gaussian kernel width used by :func:`smooth`
    (``None`` for a raw, unsmoothed histogram density).
    """

    grid: np.ndarray
    values: np.ndarray
    bandwidth: float | None = None
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        grid = np.asarray(self.grid, dtype=float)
        values = np.asarray(self.values, dtype=float)
        if grid.shape != values.shape or grid.ndim != 1 or grid.size < 2:
            raise ValueError("grid and values must be matching 1-D arrays")
        if np.any(values < 0):
            raise ValueError("density values must be nonnegative")
        object.__setattr__(self, "grid", grid)
        object.__setattr__(self, "values", values)

    def integral(self) -> float:
        return float(np.trapezoid(self.values, self.grid))


def _silverman_bandwidth(hist: Histogram1D, n: float) -> float:
    _, std = hist.mean_std()
    iqr = hist.quantile(0.75) - hist.quantile(0.25)
    spread = min(std, iqr / 1.34) if iqr > 0 else std
    if spread <= 0.0:
        spread = hist.bin_width
    return 0.9 * spread * n ** (-0.2)


def smooth(
    hist: Histogram1D,
    bandwidth: float | None = None,
    n_eff: float | None = None,
) -> EmpiricalDensity:
    """Gaussian-kernel density estimate built from a histogram.

    The histogram density is convolved with a Gaussian kernel and
    renormalised, which equals an exact KDE of the underlying samples up to
    the binning resolution.  The default bandwidth is Silverman's rule
    ``0.9 * min(std, IQR/1.34) * n**(-1/5)`` with ``n`` the retained-sample
    count, or ``n_eff`` when given (correlated time series carry fewer
    independent samples than raw counts suggest, which would otherwise
    undersmooth).

    Raises
    ------
    InsufficientData
        If the histogram holds fewer than 1000 samples.
    """
    total = hist.total
    if total < 1000:
        raise InsufficientData(f"smoothing needs >= 1000 samples, got {total}")
    n = float(n_eff) if n_eff is not None else float(total)
    if n <= 1.0:
        raise InsufficientData(f"effective sample count {n} too small to smooth")
    h = float(bandwidth) if bandwidth is not None else _silverman_bandwidth(hist, n)
    if h <= 0.0:
        raise ValueError(f"bandwidth must be positive, got {h}")
    width = hist.bin_width
    dens = hist.density()
    # pad so kernel mass has nowhere to leak, then convolve with a unit-mass kernel
    pad = int(math.ceil(5.0 * h / width)) + 1
    padded = np.concatenate([np.zeros(pad), dens, np.zeros(pad)])
    half = np.arange(-pad, pad + 1) * width
    kernel = np.exp(-0.5 * (half / h) ** 2)
    kernel /= kernel.sum()
    smoothed = np.convolve(padded, kernel, mode="same")
    centers = hist.centers
    grid = np.concatenate(
        [
            centers[0] + np.arange(-pad, 0) * width,
            centers,
            centers[-1] + np.arange(1, pad + 1) * width,
        ]
    )
    norm = np.trapezoid(smoothed, grid)
    return EmpiricalDensity(
        grid=grid,
        values=smoothed / norm,
        bandwidth=h,
        meta={"n_samples": total, "n_eff": n, "pad_bins": pad},
    )


def count_modes(
    density: EmpiricalDensity, prominence_fraction: float = 0.05
) -> ModalityVerdict:
    """Count well-separated peaks of a smoothed density.

    A peak counts only if its prominence exceeds ``prominence_fraction``
    times the global maximum, which suppresses histogram noise riding on a
    broad hump.  One qualifying peak yields a unimodal verdict, two or more
    a bimodal one (reporting the two most prominent); a density with no
    interior peak (monotone or plateau) is classified unimodal at its
    argmax.
    """
    values = density.values
    threshold = prominence_fraction * float(values.max())
    peaks, props = find_peaks(values, prominence=threshold)
    if len(peaks) == 0:
        mode = float(density.grid[int(np.argmax(values))])
        return ModalityVerdict(Modality.UNIMODAL, (mode,), VerdictSource.EMPIRICAL)
    locs = density.grid[peaks]
    if len(peaks) == 1:
        return ModalityVerdict(Modality.UNIMODAL, (float(locs[0]),), VerdictSource.EMPIRICAL)
    order = np.argsort(props["prominences"])[::-1][:2]
    note = "" if len(peaks) == 2 else f"{len(peaks)} peaks found; keeping two most prominent"
    return ModalityVerdict(
        Modality.BIMODAL,
        tuple(float(x) for x in locs[order]),
        VerdictSource.EMPIRICAL,
        note=note,
    )


def _evaluate_on(grid: np.ndarray, other) -> np.ndarray:
    if isinstance(other, EmpiricalDensity):
        return np.interp(grid, other.grid, other.values, left=0.0, right=0.0)
    pdf = getattr(other, "pdf", None)
    if pdf is not None:
        return np.asarray(pdf(grid), dtype=float)
    if callable(other):
        return np.asarray(other(grid), dtype=float)
    raise TypeError(f"cannot evaluate {type(other).__name__} as a density")


def _union_grid(d: EmpiricalDensity, other) -> np.ndarray:
    if isinstance(other, EmpiricalDensity):
        grid = np.union1d(d.grid, other.grid)
        if grid.size < 2:
            raise SupportMismatch("degenerate union grid")
        return grid
    return d.grid


def l1_distance(d: EmpiricalDensity, other) -> float:
    """Integrated absolute difference between two unit-mass densities.

    ``other`` may be another :class:`EmpiricalDensity`, any object with a
    ``pdf`` method, or a plain callable.  Mass that either density carries
    outside the evaluation grid is added to the distance, so two densities
    with disjoint supports are at the maximum distance 2.
    """
    grid = _union_grid(d, other)
    f = np.interp(grid, d.grid, d.values, left=0.0, right=0.0)
    g = _evaluate_on(grid, other)
    dist = float(np.trapezoid(np.abs(f - g), grid))
    # account for mass living outside the grid (relevant for analytic tails)
    dist += max(0.0, 1.0 - float(np.trapezoid(g, grid)))
    dist += max(0.0, 1.0 - float(np.trapezoid(f, grid)))
    return dist


def ks_distance(d: EmpiricalDensity, other) -> float:
    """Kolmogorov-Smirnov distance between two densities on a shared grid."""
    grid = _union_grid(d, other)
    f = np.interp(grid, d.grid, d.values, left=0.0, right=0.0)
    g = _evaluate_on(grid, other)
    dx = np.diff(grid)
    cf = np.concatenate([[0.0], np.cumsum(0.5 * (f[1:] + f[:-1]) * dx)])
    cg = np.concatenate([[0.0], np.cumsum(0.5 * (g[1:] + g[:-1]) * dx)])
    return float(np.max(np.abs(cf - cg)))


@dataclass(frozen=True)
class MomentEstimate:
    value: float
    se: float


def moments_with_errors(stats, variable: str = "delta", decorrelation_rate: float | None = None) -> dict[str, MomentEstimate]:
    """Mean/variance/skewness/excess-kurtosis with autocorrelation-aware errors.

    ``stats`` is a :class:`~chiarella.engine.TrajectoryStats`.  Standard
    errors use the Gaussian large-sample formulas evaluated at the effective
    sample size ``n_eff = n_retained * min(1, stride*dt * 2*rate)`` where
    ``rate`` is the decorrelation rate of the observable.  Defaults:
    ``min(kappa, alpha)`` for the mispricing and ``alpha`` for the trend;
    pass an explicit rate in regimes with slower mixing (e.g. the inverse
    barrier-crossing time when the trend is bistable).
    """
    raw = stats.moments_delta if variable == "delta" else stats.moments_m
    n = raw[0]
    if n < 2:
        raise InsufficientData(f"need >= 2 retained samples, got {int(n)}")
    params = stats.spec.params
    if decorrelation_rate is None:
        decorrelation_rate = (
            min(params.kappa, params.alpha) if variable == "delta" else params.alpha
        )
    sample_gap = stats.spec.subsample_stride * stats.spec.dt
    n_eff = n * min(1.0, sample_gap * 2.0 * decorrelation_rate)
    if n_eff < 2.0:
        n_eff = 2.0

    mean = raw[1] / n
    m2 = raw[2] / n - mean**2
    m3 = raw[3] / n - 3.0 * mean * raw[2] / n + 2.0 * mean**3
    m4 = (
        raw[4] / n
        - 4.0 * mean * raw[3] / n
        + 6.0 * mean**2 * raw[2] / n
        - 3.0 * mean**4
    )
    m2 = max(m2, 0.0)
    var = m2 * n / (n - 1.0)
    if m2 > 0.0:
        skew = m3 / m2**1.5
        kurt = m4 / m2**2 - 3.0
    else:
        skew = 0.0
        kurt = 0.0
    return {
        "mean": MomentEstimate(mean, math.sqrt(var / n_eff) if var > 0 else 0.0),
        "variance": MomentEstimate(var, var * math.sqrt(2.0 / n_eff)),
        "skewness": MomentEstimate(skew, math.sqrt(6.0 / n_eff)),
        "kurtosis": MomentEstimate(kurt, math.sqrt(24.0 / n_eff)),
    }

"""Euler-Maruyama integration of the full and reduced dynamics.

The full system tracks (log-price, trend, log-value); the reduced system
tracks (mispricing, trend), which is what every stationary statistic in
this package is written in.  Both share the fundamental drift-cancellation
property: subtracting the value equation from the price equation removes
``g``, so full-system runs are summarised by the same (delta, M) histograms
as reduced ones.

Reproducibility contract: a run is determined by ``(seed, n_paths)`` and the
numeric settings alone.  Path ``i`` draws from a ``Philox`` stream spawned
as ``SeedSequence(seed, spawn_key=(i,))``, noise is consumed in fixed-size
chunks as ``standard_normal((2, chunk))`` (row 0 drives the traders, row 1
the fundamental), and per-path summaries are merged in path order.  Repeat
runs are bit-identical; thread count affects wall time only.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from . import _kernels
from .empirics import Histogram1D
from .errors import NonFiniteSample, SupportMismatch
from .params import ModelParams

__all__ = [
    "FullState",
    "ReducedState",
    "SimSpec",
    "TrajectoryStats",
    "step_full",
    "step_reduced",
    "default_dt",
    "default_stride",
    "simulate",
    "to_xy",
    "from_xy",
]

GENERATOR_NAME = "philox-4x64"
_CHUNK_STEPS = 1 << 21
_MAX_RETAINED = 40_000_000  # pooled float64 sample cap (~640 MB for two variables)


@dataclass(frozen=True)
class FullState:
    """Full system state: log-price, trend estimate, log-value."""

    price: float
    m: float
    value: float

    @property
    def delta(self) -> float:
        return self.price - self.value


@dataclass(frozen=True)
class ReducedState:
    """Reduced system state: mispricing and trend estimate."""

    delta: float
    m: float


def step_full(state: FullState, p: ModelParams, dt: float, noise: tuple[float, float]) -> FullState:
    """One Euler-Maruyama step of the full system.

    ``noise`` holds two independent standard normals ``(xi_n, xi_v)``; the
    trend update reuses the *return* increment net of drift, so the
    fundamental shock enters the trend only through next-step feedback.
    """
    xi_n, xi_v = noise
    sq = math.sqrt(dt)
    sn_dt = p.sigma_n * sq
    sv_dt = p.sigma_v * sq
    th = math.tanh(p.gamma * state.m)
    g_dt = p.g * dt
    dp = (p.kappa * (state.value - state.price) + p.beta * th + p.g) * dt + sn_dt * xi_n
    dval = g_dt + sv_dt * xi_v
    m = state.m + (p.alpha * (dp - g_dt) - p.alpha * state.m * dt)
    return FullState(price=state.price + dp, m=m, value=state.value + dval)


def step_reduced(
    state: ReducedState, p: ModelParams, dt: float, noise: tuple[float, float]
) -> ReducedState:
    """One Euler-Maruyama step of the reduced (mispricing, trend) system.

    The trend increment is computed from the mispricing increment plus the
    fundamental shock — i.e. from the same realised return the full system
    would have produced — not from an independent discretisation.
    """
    xi_n, xi_v = noise
    sq = math.sqrt(dt)
    sn_dt = p.sigma_n * sq
    sv_dt = p.sigma_v * sq
    th = math.tanh(p.gamma * state.m)
    dv = sv_dt * xi_v
    dd = (p.beta * th - p.kappa * state.delta) * dt + sn_dt * xi_n - dv
    m = state.m + (p.alpha * (dd + dv) - p.alpha * state.m * dt)
    return ReducedState(delta=state.delta + dd, m=m)


def to_xy(state: ReducedState, p: ModelParams) -> tuple[float, float]:
    """Rotate to the slow frame ``x = delta``, ``y = m - alpha*delta``."""
    return state.delta, state.m - p.alpha * state.delta


def from_xy(x: float, y: float, p: ModelParams) -> ReducedState:
    """Inverse of :func:`to_xy` (exact round-trip)."""
    return ReducedState(delta=x, m=y + p.alpha * x)


def default_dt(p: ModelParams) -> float:
    """Conservative step: resolve both rates and the saturation scale."""
    candidates = [1.0 / (20.0 * p.alpha), 1.0 / (20.0 * p.kappa)]
    if p.gamma > 0.0:
        candidates.append(p.gamma / 2.0)
    return min(candidates)


def default_stride(p: ModelParams, dt: float) -> int:
    """Sampling stride of about one slowest-rate correlation time."""
    return max(1, round(1.0 / (min(p.kappa, p.alpha) * dt)))


@dataclass(frozen=True)
class SimSpec:
    """Complete, serialisable description of a simulation run.

    ``dt`` and ``subsample_stride`` may be left ``None`` to accept the
    defaults derived from the parameters (:func:`default_dt`,
    :func:`default_stride`).  ``init`` selects the system: a
    :class:`FullState` runs the three-variable dynamics, a
    :class:`ReducedState` the two-variable one.  Histogram edges are chosen
    from the pooled retained samples (mean ± 6 std) unless explicit ranges
    are given.
    """

    params: ModelParams
    total_time: float
    dt: float | None = None
    burn_in_fraction: float = 0.1
    subsample_stride: int | None = None
    seed: int = 0
    n_paths: int = 1
    init: ReducedState | FullState = ReducedState(0.0, 0.0)
    hist_bins: int = 256
    delta_range: tuple[float, float] | None = None
    m_range: tuple[float, float] | None = None

    def __post_init__(self):
        if self.total_time <= 0 or not math.isfinite(self.total_time):
            raise ValueError(f"total_time must be positive, got {self.total_time}")
        if not 0.0 <= self.burn_in_fraction < 1.0:
            raise ValueError(
                f"burn_in_fraction must be in [0, 1), got {self.burn_in_fraction}"
            )
        if not 0 <= int(self.seed) < 2**64:
            raise ValueError("seed must fit in an unsigned 64-bit integer")
        if self.n_paths < 1:
            raise ValueError(f"n_paths must be >= 1, got {self.n_paths}")
        if self.hist_bins < 10:
            raise ValueError(f"hist_bins must be >= 10, got {self.hist_bins}")
        if self.dt is not None:
            if self.dt <= 0 or not math.isfinite(self.dt):
                raise ValueError(f"dt must be positive, got {self.dt}")
            if self.total_time / self.dt < 1000.0:
                raise ValueError("total_time must cover at least 1000 steps")
        if self.subsample_stride is not None and self.subsample_stride < 1:
            raise ValueError(f"subsample_stride must be >= 1, got {self.subsample_stride}")

    def resolved(self) -> "SimSpec":
        """Fill in derived defaults so every numeric field is concrete."""
        dt = self.dt if self.dt is not None else default_dt(self.params)
        stride = (
            self.subsample_stride
            if self.subsample_stride is not None
            else default_stride(self.params, dt)
        )
        out = replace(self, dt=dt, subsample_stride=stride)
        if out.total_time / out.dt < 1000.0:
            raise ValueError("total_time must cover at least 1000 steps")
        return out

    def describe(self) -> dict:
        """JSON-ready summary used as run metadata."""
        spec = self.resolved()
        init = spec.init
        if isinstance(init, FullState):
            init_desc = {"price": init.price, "m": init.m, "value": init.value}
            system = "full"
        else:
            init_desc = {"delta": init.delta, "m": init.m}
            system = "reduced"
        return {
            "params": spec.params.to_dict(),
            "total_time": spec.total_time,
            "dt": spec.dt,
            "burn_in_fraction": spec.burn_in_fraction,
            "subsample_stride": spec.subsample_stride,
            "seed": int(spec.seed),
            "n_paths": spec.n_paths,
            "system": system,
            "init": init_desc,
            "hist_bins": spec.hist_bins,
            "generator": GENERATOR_NAME,
        }


@dataclass(frozen=True)
class TrajectoryStats:
    """Mergeable summary of retained (mispricing, trend) samples.

    ``moments_*`` hold raw power sums ``(n, Σx, Σx², Σx³, Σx⁴)``; histograms
    share edges across everything merged together.  ``paths`` records which
    path indices contributed.
    """

    spec: SimSpec
    hist_delta: Histogram1D
    hist_m: Histogram1D
    moments_delta: np.ndarray
    moments_m: np.ndarray
    n_retained: int
    paths: tuple[int, ...] = ()
    meta: dict = field(default_factory=dict)

    def merge(self, other: "TrajectoryStats") -> "TrajectoryStats":
        """Combine two summaries of the same run configuration.

        Merging is exact for histograms (integer counts) and order-stable
        for moment sums; histogram edges must match.
        """
        if self.spec.describe() != other.spec.describe():
            raise SupportMismatch("cannot merge stats from different run configurations")
        return TrajectoryStats(
            spec=self.spec,
            hist_delta=self.hist_delta.merge(other.hist_delta),
            hist_m=self.hist_m.merge(other.hist_m),
            moments_delta=self.moments_delta + other.moments_delta,
            moments_m=self.moments_m + other.moments_m,
            n_retained=self.n_retained + other.n_retained,
            paths=tuple(sorted(self.paths + other.paths)),
            meta=dict(self.meta),
        )

    @classmethod
    def from_samples(
        cls,
        spec: SimSpec,
        delta: np.ndarray,
        m: np.ndarray,
        edges_delta: np.ndarray,
        edges_m: np.ndarray,
        path: int = 0,
    ) -> "TrajectoryStats":
        counts_d, _ = np.histogram(delta, bins=edges_delta)
        counts_m, _ = np.histogram(m, bins=edges_m)
        return cls(
            spec=spec,
            hist_delta=Histogram1D(edges_delta, counts_d.astype(np.int64)),
            hist_m=Histogram1D(edges_m, counts_m.astype(np.int64)),
            moments_delta=_power_sums(delta),
            moments_m=_power_sums(m),
            n_retained=delta.size,
            paths=(path,),
        )


def _power_sums(x: np.ndarray) -> np.ndarray:
    x2 = x * x
    return np.array(
        [float(x.size), float(x.sum()), float(x2.sum()), float((x2 * x).sum()), float((x2 * x2).sum())]
    )


def _integrate_path(spec: SimSpec, path: int, n_steps: int, burn_steps: int, n_ret: int):
    """Run one path, returning its retained (delta, m) sample arrays."""
    p = spec.params
    rng = np.random.Generator(
        np.random.Philox(np.random.SeedSequence(entropy=int(spec.seed), spawn_key=(path,)))
    )
    dt = spec.dt
    sq = math.sqrt(dt)
    sn_dt = p.sigma_n * sq
    sv_dt = p.sigma_v * sq
    stride = spec.subsample_stride
    out_d = np.empty(n_ret)
    out_m = np.empty(n_ret)
    pos = 0
    nxt = burn_steps + stride
    done = 0
    full = isinstance(spec.init, FullState)
    if full:
        price, m, value = spec.init.price, spec.init.m, spec.init.value
    else:
        delta, m = spec.init.delta, spec.init.m
    while done < n_steps:
        chunk = min(_CHUNK_STEPS, n_steps - done)
        xi = rng.standard_normal((2, chunk))
        if full:
            price, m, value, pos, nxt, bad = _kernels.run_full(
                price, m, value, p.kappa, p.beta, p.gamma, p.alpha, p.g,
                sn_dt, sv_dt, dt, xi[0], xi[1], done, stride, out_d, out_m, pos, nxt,
            )
        else:
            delta, m, pos, nxt, bad = _kernels.run_reduced(
                delta, m, p.kappa, p.beta, p.gamma, p.alpha,
                sn_dt, sv_dt, dt, xi[0], xi[1], done, stride, out_d, out_m, pos, nxt,
            )
        if bad != -1:
            raise NonFiniteSample(step=bad, path=path)
        done += chunk
    return out_d[:pos], out_m[:pos]


def _edges_for(samples: np.ndarray, given: tuple[float, float] | None, n_bins: int) -> np.ndarray:
    if given is not None:
        lo, hi = float(given[0]), float(given[1])
    else:
        mean = float(samples.mean())
        std = float(samples.std())
        if std == 0.0:
            lo, hi = mean - 0.5, mean + 0.5
        else:
            lo, hi = mean - 6.0 * std, mean + 6.0 * std
    return np.linspace(lo, hi, n_bins + 1)


def simulate(spec: SimSpec, threads: int = 1) -> TrajectoryStats:
    """Integrate ``spec.n_paths`` independent paths and merge their summaries.

    Retention: after a burn-in of ``burn_in_fraction * total_time``, every
    ``subsample_stride``-th state is kept.  Histogram edges come from the
    pooled retained samples (or the explicit ``SimSpec`` ranges); moments
    include every retained sample even if an explicit range clips it out of
    the histogram.

    Raises
    ------
    NonFiniteSample
        If any path leaves the finite range (diagnoses too-large ``dt``).
    ValueError
        If the retention settings would pool more than ~4e7 samples.
    """
    spec = spec.resolved()
    n_steps = round(spec.total_time / spec.dt)
    burn_steps = round(spec.burn_in_fraction * n_steps)
    n_ret = (n_steps - burn_steps) // spec.subsample_stride
    if n_ret < 1:
        raise ValueError("no samples retained: reduce stride or burn-in")
    if n_ret * spec.n_paths > _MAX_RETAINED:
        raise ValueError(
            f"{n_ret * spec.n_paths:.3g} retained samples exceed the memory budget; "
            "increase subsample_stride"
        )

    if threads > 1 and spec.n_paths > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(
                pool.map(
                    lambda i: _integrate_path(spec, i, n_steps, burn_steps, n_ret),
                    range(spec.n_paths),
                )
            )
    else:
        results = [
            _integrate_path(spec, i, n_steps, burn_steps, n_ret)
            for i in range(spec.n_paths)
        ]

    pooled_d = np.concatenate([r[0] for r in results])
    pooled_m = np.concatenate([r[1] for r in results])
    edges_d = _edges_for(pooled_d, spec.delta_range, spec.hist_bins)
    edges_m = _edges_for(pooled_m, spec.m_range, spec.hist_bins)

    merged: TrajectoryStats | None = None
    for i, (d, m) in enumerate(results):
        stats = TrajectoryStats.from_samples(spec, d, m, edges_d, edges_m, path=i)
        merged = stats if merged is None else merged.merge(stats)
    merged.meta.update(merged.spec.describe())
    return merged

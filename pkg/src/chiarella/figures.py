"""Reference-scenario reproduction: simulations, CSV panels, and rendered plots.

Four stock scenarios exercise one regime each:

1. linear regime across four decades of saturation steepness,
2. slow trend around both bimodality thresholds,
3. fast trend at weak coupling,
4. strong coupling below and above the trend-barrier threshold.

Each scenario runs at ``desk`` scale by default (shortened horizon, verdict
tolerances widened threefold) or at the reference horizon with ``full=True``.
Every panel writes a ``<name>.csv`` table (histogram plus analytic overlay),
a JSON sidecar, and — unless plotting is disabled — lands in a rendered PNG
alongside the verdict JSON.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt

from . import reporting
from .densities import analytic_density
from .errors import ChiarellaError
from .empirics import Histogram1D, count_modes, l1_distance, moments_with_errors, smooth
from .engine import SimSpec, simulate
from .params import Modality, ModelParams

__all__ = ["FIGURES", "run_figure"]


@dataclass(frozen=True)
class PanelSpec:
    """One simulation panel within a reference scenario."""

    label: str
    params: ModelParams
    total_time: float
    dt: float
    n_paths: int
    stride: int
    hist_bins: int = 256
    regime: str = "linear"  # analytic overlay for the mispricing
    expected_modes_delta: int | None = None
    expected_modes_m: int | None = None
    # mispricing mode detection: the law is even, so folding the histogram
    # cancels slow well-occupancy noise; a custom prominence floor supports
    # laws whose central dip is genuinely shallower than the 5% default
    fold_delta: bool = False
    delta_prominence: float | None = None
    check_variance: bool = False  # empirical Var[delta] vs the overlay's variance
    check_l1: bool = False
    note: str = ""
    m_overlay: str | None = None  # optional analytic overlay for the trend


@dataclass(frozen=True)
class FigureSpec:
    number: int
    title: str
    panels: tuple[PanelSpec, ...]
    skipped_panels: tuple[str, ...] = field(default=())
    show_trend: bool = False  # render the trend density column as well


def _fig1(full: bool) -> FigureSpec:
    scale = 1e9 if full else 1e7  # horizon = gamma * scale
    panels = []
    for gamma in (1e-4, 1e-3, 1e-2, 1e-1):
        p = ModelParams(kappa=0.1, beta=0.2, gamma=gamma, alpha=0.2, sigma_n=0.2, sigma_v=0.1)
        dt = gamma / 2.0
        total_time = gamma * scale
        # ~ one mispricing correlation time between samples, but keep at
        # least ~500 samples per path so short desk horizons stay smoothable
        stride = max(1, min(round(10.0 / dt), round(total_time / dt / 500.0)))
        panels.append(
            PanelSpec(
                label=f"gamma{gamma:g}",
                params=p,
                total_time=total_time,
                dt=dt,
                n_paths=2 if full else 8,
                stride=stride,
                regime="linear",
                expected_modes_delta=1,
                check_variance=True,
                check_l1=True,
            )
        )
    return FigureSpec(1, "linear regime: Gaussian mispricing across saturation scales", tuple(panels))


def _fig2(full: bool) -> FigureSpec:
    total_time = 5e7 if full else 5e5
    panels = []
    for kappa, modes, fold, prom, note in (
        (0.2, 1, False, None, ""),
        # analytic dip contrast at this kappa is 5.7% of the peak; fold the
        # even law and accept half that contrast so slow well-occupancy
        # noise cannot flip the verdict at desk horizons
        (0.075, 2, True, 0.0287, "near-threshold contrast ~6%: folded detector at half the analytic dip"),
        (0.02, 2, False, None, ""),
    ):
        p = ModelParams(kappa=kappa, beta=0.05, gamma=5e4, alpha=2e-5, sigma_n=0.2, sigma_v=0.1)
        panels.append(
            PanelSpec(
                label=f"kappa{kappa:g}",
                params=p,
                total_time=total_time,
                dt=0.01,
                n_paths=2 if full else 8,
                stride=500,
                hist_bins=512,
                regime="slow-trend",
                expected_modes_delta=modes,
                fold_delta=fold,
                delta_prominence=prom,
                check_l1=True,
                note=note,
            )
        )
    return FigureSpec(2, "slow trend: one or two mispricing modes", tuple(panels))


def _fig3(full: bool) -> FigureSpec:
    # Euler bias at the pinned dt grows like ~25% of theta, so the checked
    # panels stay at theta <= 0.084 where the 5% variance tolerance holds.
    total_time = 1e5 if full else 1e4
    alpha, gamma, sigma_n, sigma_v, kappa = 500.0, 1.0, 0.8, 0.1, 0.1
    panels = []
    for beta in (0.5, 1.0, 1.5):
        p = ModelParams(kappa=kappa, beta=beta, gamma=gamma, alpha=alpha, sigma_n=sigma_n, sigma_v=sigma_v)
        panels.append(
            PanelSpec(
                label=f"beta{beta:g}",
                params=p,
                total_time=total_time,
                dt=1e-3,
                n_paths=4 if full else 8,
                stride=50,
                regime="fast-trend",
                expected_modes_delta=1,
                check_variance=True,
                check_l1=True,
            )
        )
    return FigureSpec(3, "fast trend: Gaussian mispricing with renormalised rates", tuple(panels))


def _fig4(full: bool) -> FigureSpec:
    base = dict(kappa=0.05, gamma=1.0, alpha=50.0, sigma_n=0.7, sigma_v=0.2)
    top = PanelSpec(
        label="beta5",
        params=ModelParams(beta=5.0, **base),
        total_time=1e5 if full else 1e4,
        dt=1e-3,
        n_paths=8,
        stride=100,
        regime="strong-coupling",
        expected_modes_delta=1,
        expected_modes_m=2,
        fold_delta=True,
        delta_prominence=0.01,
        m_overlay="trend-marginal",
        note="theta ~ 1.01: trend bistable, mispricing still single-peaked",
    )
    panels = [top]
    skipped: tuple[str, ...] = ()
    if full:
        panels.append(
            PanelSpec(
                label="beta18",
                params=ModelParams(beta=18.0, **base),
                total_time=1e5,
                dt=1e-3,
                n_paths=8,
                stride=200,
                regime="strong-coupling",
                expected_modes_delta=2,
                expected_modes_m=2,
                # the mispricing lobes overlap heavily here (the trend flips
                # long before delta reaches +-beta/kappa), leaving a ~2.5%
                # central dip; 1% sits ~20 sigma above the seed noise and the
                # truly unimodal beta=5 case measures exactly zero
                fold_delta=True,
                delta_prominence=0.01,
                m_overlay="trend-marginal",
                note="theta ~ 3.64: shallow mispricing dip needs the full horizon",
            )
        )
    else:
        skipped = ("beta18's shallow mispricing dip needs the reference horizon (1e5); rerun with --full",)
    return FigureSpec(
        4,
        "strong coupling: trend bistability and mispricing splitting",
        tuple(panels),
        skipped_panels=skipped,
        show_trend=True,
    )


FIGURES = {1: _fig1, 2: _fig2, 3: _fig3, 4: _fig4}


def _delta_decorrelation_rate(panel: PanelSpec) -> float:
    # local mean-reversion rate of the mispricing; sets the KDE bandwidth scale
    return panel.params.kappa


def _m_decorrelation_rate(panel: PanelSpec) -> float:
    p = panel.params
    if panel.regime == "strong-coupling" and p.beta * p.gamma > 1.0:
        from .strong_coupling import arrhenius_crossing_time

        return 1.0 / arrhenius_crossing_time(p)
    return p.alpha


def _n_eff(stats, rate: float) -> float:
    gap = stats.spec.subsample_stride * stats.spec.dt
    return stats.n_retained * min(1.0, gap * 2.0 * rate)


def _analytic_overlay(panel: PanelSpec, grid: np.ndarray, variable: str):
    """(tag, values) for the panel's analytic overlay, or (None, None)."""
    regime = panel.m_overlay if variable == "m" else panel.regime
    if regime is None:
        return None, None
    try:
        law = analytic_density(panel.params, regime)
    except ChiarellaError:
        return None, None  # regime refusal (e.g. no Gaussian law): plot histogram only
    return law.tag, law.pdf_grid(grid)


def run_figure(
    number: int,
    out_dir: Path | str,
    seed: int = 2024,
    threads: int = 1,
    full: bool = False,
    plot: bool = True,
) -> dict:
    """Simulate, check, and render one reference scenario.

    Returns the verdict dictionary that is also written to
    ``fig<N>_verdict.json``.  Desk runs (default) use shortened horizons and
    widen the scalar tolerances threefold; mode-count checks are exact at
    either scale.
    """
    if number not in FIGURES:
        raise ValueError(f"unknown figure {number}; choose from {sorted(FIGURES)}")
    spec = FIGURES[number](full)
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    widen = 1.0 if full else 3.0
    panel_reports = []
    rendered: list[tuple[PanelSpec, dict]] = []

    for idx, panel in enumerate(spec.panels):
        sim = SimSpec(
            params=panel.params,
            total_time=panel.total_time,
            dt=panel.dt,
            subsample_stride=panel.stride,
            seed=seed + 1000 * number + idx,
            n_paths=panel.n_paths,
            hist_bins=panel.hist_bins,
        )
        stats = simulate(sim, threads=threads)
        report = {
            "label": panel.label,
            "params": panel.params.to_dict(),
            "total_time": panel.total_time,
            "dt": panel.dt,
            "n_paths": panel.n_paths,
            "note": panel.note,
            "checks": [],
        }
        data: dict[str, object] = {"stats": stats}

        dens_delta = smooth(stats.hist_delta, n_eff=_n_eff(stats, _delta_decorrelation_rate(panel)))
        dens_m = smooth(stats.hist_m, n_eff=_n_eff(stats, _m_decorrelation_rate(panel)))
        data["dens_delta"] = dens_delta
        data["dens_m"] = dens_m

        tag, overlay = _analytic_overlay(panel, dens_delta.grid, "delta")
        data["overlay_delta"] = (tag, overlay)
        m_tag, m_overlay = _analytic_overlay(panel, dens_m.grid, "m")
        data["overlay_m"] = (m_tag, m_overlay)

        if panel.check_variance and overlay is not None:
            est = moments_with_errors(stats, "delta")["variance"]
            law = analytic_density(panel.params, panel.regime)
            target = law.meta.get("variance")
            gap = abs(est.value - target)
            bound = max(3.0 * est.se, widen * 0.05 * target) if panel.regime == "fast-trend" else 3.0 * est.se
            report["checks"].append(
                {
                    "name": "variance",
                    "passed": bool(gap <= bound),
                    "value": est.value,
                    "target": target,
                    "bound": bound,
                }
            )
        if panel.check_l1 and overlay is not None:
            dist = l1_distance(dens_delta, lambda x, t=panel: analytic_density(t.params, t.regime).pdf(x))
            bound = widen * 0.05
            report["checks"].append(
                {"name": "l1", "passed": bool(dist <= bound), "value": dist, "bound": bound}
            )
        if panel.expected_modes_delta is not None:
            dens_for_modes = dens_delta
            if panel.fold_delta:
                h = stats.hist_delta
                folded = Histogram1D(h.edges, h.counts + h.counts[::-1])
                dens_for_modes = smooth(folded, n_eff=_n_eff(stats, _delta_decorrelation_rate(panel)))
            if panel.delta_prominence is not None:
                verdict = count_modes(dens_for_modes, prominence_fraction=panel.delta_prominence)
            else:
                verdict = count_modes(dens_for_modes)
            found = 1 if verdict.modality is Modality.UNIMODAL else 2
            report["checks"].append(
                {
                    "name": "delta_modes",
                    "passed": bool(found == panel.expected_modes_delta),
                    "value": found,
                    "target": panel.expected_modes_delta,
                    "modes": list(verdict.modes),
                }
            )
        if panel.expected_modes_m is not None:
            verdict = count_modes(dens_m)
            found = 1 if verdict.modality is Modality.UNIMODAL else 2
            report["checks"].append(
                {
                    "name": "m_modes",
                    "passed": bool(found == panel.expected_modes_m),
                    "value": found,
                    "target": panel.expected_modes_m,
                    "modes": list(verdict.modes),
                }
            )

        # CSV: histogram + analytic overlay on bin centers
        hist = stats.hist_delta
        centers = hist.centers
        if overlay is not None:
            analytic_on_centers = analytic_density(panel.params, panel.regime).pdf_grid(centers)
        else:
            analytic_on_centers = np.full_like(centers, math.nan)
        rows = [
            (float(c), int(n), float(d), float(a))
            for c, n, d, a in zip(centers, hist.counts, hist.density(), analytic_on_centers)
        ]
        csv_path = out / f"fig{number}_{panel.label}.csv"
        meta = reporting.run_metadata(stats.spec.describe(), seed=sim.seed)
        reporting.write_csv(
            csv_path, ("bin_center", "count", "density", "analytic_density"), rows, meta=meta
        )
        sidecar = {"panel": panel.label, "analytic_tag": tag, "run": stats.spec.describe(), **meta}
        reporting.write_json(csv_path.with_suffix(".json"), sidecar)
        panel_reports.append(report)
        rendered.append((panel, data))

    verdict = {
        "figure": number,
        "title": spec.title,
        "mode": "full" if full else "desk",
        "tolerance_widening": widen,
        "panels": panel_reports,
        "skipped_panels": list(spec.skipped_panels),
        "all_passed": all(c["passed"] for r in panel_reports for c in r["checks"]),
        "metadata": reporting.run_metadata({"figure": number, "full": full, "seed": seed}, seed=seed),
    }
    reporting.write_json(out / f"fig{number}_verdict.json", verdict)

    if plot:
        _render(number, spec, rendered, out)
    return verdict


def _render(number: int, spec: FigureSpec, rendered, out: Path) -> None:
    n_panels = len(rendered)
    n_cols = 2 if spec.show_trend else 1
    fig, axes = plt.subplots(
        n_panels,
        n_cols,
        figsize=(5.2 * n_cols, 2.9 * n_panels),
        squeeze=False,
    )
    for row, (panel, data) in enumerate(rendered):
        ax = axes[row][0]
        dens = data["dens_delta"]
        ax.plot(dens.grid, dens.values, lw=1.2, label="simulation")
        tag, overlay = data["overlay_delta"]
        if overlay is not None:
            ax.plot(dens.grid, overlay, "k--", lw=1.0, label=tag)
        ax.set_xlabel("mispricing")
        ax.set_ylabel("density")
        ax.set_title(panel.label, fontsize=9)
        ax.legend(fontsize=7, frameon=False)
        if spec.show_trend:
            ax2 = axes[row][1]
            dens_m = data["dens_m"]
            ax2.plot(dens_m.grid, dens_m.values, lw=1.2, label="simulation")
            m_tag, m_overlay = data["overlay_m"]
            if m_overlay is not None:
                ax2.plot(dens_m.grid, m_overlay, "k--", lw=1.0, label=m_tag)
            ax2.set_xlabel("trend")
            ax2.set_ylabel("density")
            ax2.set_title(f"{panel.label} (trend)", fontsize=9)
            ax2.legend(fontsize=7, frameon=False)
    fig.suptitle(spec.title, fontsize=11)
    fig.tight_layout(rect=(0, 0, 1, 0.97))
    fig.savefig(out / f"fig{number}.png", dpi=150)
    plt.close(fig)

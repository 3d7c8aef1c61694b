"""Command-line entry point.

``chiarella`` wires the library into six subcommands:

- ``simulate``: Monte-Carlo run from a JSON config; histogram CSVs + stats JSON.
- ``density``: analytic stationary density on a grid; ``x,p`` CSV + sidecar.
- ``modality``: analytic peak-count verdict for one parameter point.
- ``sweep``: phase/modality table over one or two parameter axes.
- ``verify``: built-in oracle suite; exit 1 if any check fails.
- ``reproduce-fig``: reference scenarios; CSV panels, verdict JSON, PNG plot.

Exit codes: 0 success, 1 failed verification, 2 configuration error,
3 numerical failure, 4 regime refusal (parameters outside a law's domain).
Threads default to the ``CHIARELLA_THREADS`` environment variable (then 1).
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import __version__, reporting
from .densities import REGIME_TAGS, analytic_density
from .empirics import count_modes, moments_with_errors, smooth
from .engine import FullState, ReducedState, SimSpec, simulate
from .errors import (
    BracketFailure,
    NoBarrier,
    NoGaussianDensity,
    NonFiniteSample,
    NoStationaryDistribution,
    QuadratureFailure,
    SingularCovariance,
    UnsupportedRegime,
)
from .figures import FIGURES, run_figure
from .params import (
    ModelParams,
    Regime,
    classify_deterministic_phase,
    derive_params,
    predict_modality,
)

_REFUSAL = (NoGaussianDensity, NoBarrier, UnsupportedRegime, NoStationaryDistribution)
_NUMERICAL = (NonFiniteSample, QuadratureFailure, BracketFailure, SingularCovariance)


# ---------------------------------------------------------------- helpers

def _u64(text: str) -> int:
    value = int(text)
    if not 0 <= value < 2**64:
        raise ValueError("seed must fit in an unsigned 64-bit integer")
    return value


def _threads(args) -> int:
    n = getattr(args, "threads", None)
    if n is None:
        n = int(os.environ.get("CHIARELLA_THREADS", "1"))
    if n < 1:
        raise ValueError(f"threads must be >= 1, got {n}")
    return n


def _load_config(path: str) -> dict:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ValueError(f"cannot read config file {path}: {exc}") from exc
    cfg = json.loads(text)  # JSONDecodeError is a ValueError
    if not isinstance(cfg, dict):
        raise ValueError("config must be a JSON object")
    return cfg


def _require(cfg: dict, *keys: str) -> None:
    missing = [k for k in keys if k not in cfg]
    if missing:
        raise ValueError(f"missing config keys: {missing}")


def _check_keys(cfg: dict, allowed: set[str]) -> None:
    unknown = set(cfg) - allowed
    if unknown:
        raise ValueError(f"unknown config keys: {sorted(unknown)}")


def _parse_init(raw) -> ReducedState | FullState:
    if raw is None:
        return ReducedState(0.0, 0.0)
    if not isinstance(raw, dict):
        raise ValueError("init must be an object")
    keys = set(raw)
    if keys == {"delta", "m"}:
        return ReducedState(float(raw["delta"]), float(raw["m"]))
    if keys == {"price", "m", "value"}:
        return FullState(float(raw["price"]), float(raw["m"]), float(raw["value"]))
    raise ValueError(
        "init must have keys {delta, m} (reduced system) or {price, m, value} (full system)"
    )


_SIM_KEYS = {
    "params",
    "total_time",
    "dt",
    "burn_in_fraction",
    "subsample_stride",
    "n_paths",
    "seed",
    "hist_bins",
    "init",
    "delta_range",
    "m_range",
}


def _sim_spec(cfg: dict, seed_override: int | None) -> SimSpec:
    _check_keys(cfg, _SIM_KEYS)
    _require(cfg, "params", "total_time")
    kwargs = {}
    if cfg.get("dt") is not None:
        kwargs["dt"] = float(cfg["dt"])
    if "burn_in_fraction" in cfg:
        kwargs["burn_in_fraction"] = float(cfg["burn_in_fraction"])
    if cfg.get("subsample_stride") is not None:
        kwargs["subsample_stride"] = int(cfg["subsample_stride"])
    if "n_paths" in cfg:
        kwargs["n_paths"] = int(cfg["n_paths"])
    if "hist_bins" in cfg:
        kwargs["hist_bins"] = int(cfg["hist_bins"])
    if "seed" in cfg:
        kwargs["seed"] = _u64(str(cfg["seed"]))
    if seed_override is not None:
        kwargs["seed"] = seed_override
    for key in ("delta_range", "m_range"):
        if cfg.get(key) is not None:
            lo, hi = cfg[key]
            kwargs[key] = (float(lo), float(hi))
    return SimSpec(
        params=ModelParams.from_dict(cfg["params"]),
        total_time=float(cfg["total_time"]),
        init=_parse_init(cfg.get("init")),
        **kwargs,
    )


def _regime_enum(name: str) -> Regime:
    try:
        return Regime(name.replace("-", "_"))
    except ValueError:
        raise ValueError(
            f"unknown regime {name!r}; expected one of "
            f"{sorted(r.value.replace('_', '-') for r in Regime)}"
        ) from None


def _default_grid(law) -> np.ndarray:
    p = law.params
    if law.variable == "m":
        half = p.beta + 10.0 * p.sigma_n * math.sqrt(p.alpha)
    elif "variance" in law.meta:
        half = 8.0 * math.sqrt(law.meta["variance"])
    else:  # two-peaked mispricing law: cover both peaks plus Gaussian tails
        width = math.sqrt(derive_params(p).sigma_sq / (2.0 * p.kappa))
        x_star = max((abs(m) for m in law.meta.get("modes", ())), default=0.0)
        half = x_star + 8.0 * width
    return np.linspace(-half, half, 801)


def _parse_grid(raw) -> np.ndarray:
    _check_keys(raw, {"min", "max", "points"})
    _require(raw, "min", "max", "points")
    lo, hi, n = float(raw["min"]), float(raw["max"]), int(raw["points"])
    if not lo < hi:
        raise ValueError(f"grid needs min < max, got [{lo}, {hi}]")
    if n < 8:
        raise ValueError(f"grid needs >= 8 points, got {n}")
    return np.linspace(lo, hi, n)


# ---------------------------------------------------------------- commands

def cmd_simulate(args) -> int:
    cfg = _load_config(args.config)
    spec = _sim_spec(cfg, args.seed)
    stats = simulate(spec, threads=_threads(args))
    summary = reporting.write_stats(stats, args.out, config=spec.describe())
    est = moments_with_errors(stats, "delta")
    print(f"retained {stats.n_retained} samples from {spec.n_paths} path(s)")
    print(
        f"mispricing mean {est['mean'].value:+.6g} +- {est['mean'].se:.2g}, "
        f"variance {est['variance'].value:.6g} +- {est['variance'].se:.2g}"
    )
    for name in ("delta_hist.csv", "m_hist.csv", "stats.json"):
        print(f"wrote {Path(args.out) / name}")
    return 0


def cmd_density(args) -> int:
    cfg = _load_config(args.config)
    _check_keys(cfg, {"params", "regime", "grid"})
    _require(cfg, "params", "regime")
    p = ModelParams.from_dict(cfg["params"])
    law = analytic_density(p, cfg["regime"])
    grid = _parse_grid(cfg["grid"]) if "grid" in cfg else _default_grid(law)
    values = law.pdf_grid(grid)

    if law.meta.get("linear_valid") is False:
        print(
            f"warning: saturation scale gamma*sigma_m = {law.meta['gamma_sigma_m']:.3g} "
            "is not small; the linear law is a poor approximation here",
            file=sys.stderr,
        )
    for note in law.meta.get("warnings", ()):
        print(f"warning: {note}", file=sys.stderr)

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    config = {"params": p.to_dict(), "regime": cfg["regime"], "grid_points": len(grid)}
    meta = reporting.run_metadata(config)
    sidecar = {
        "law": law.tag,
        "variable": law.variable,
        "regime": cfg["regime"],
        "params": p.to_dict(),
        "diagnostics": law.meta,
        **meta,
    }
    reporting.write_density(out / "density.csv", grid, values, sidecar=sidecar, meta=meta)
    print(f"wrote {out / 'density.csv'} ({law.tag}, {len(grid)} points)")
    return 0


def cmd_modality(args) -> int:
    cfg = _load_config(args.config)
    _check_keys(cfg, {"params", "regime"})
    _require(cfg, "params", "regime")
    p = ModelParams.from_dict(cfg["params"])
    verdict = predict_modality(p, _regime_enum(cfg["regime"]))
    phase = classify_deterministic_phase(p)
    obj = {
        "params": p.to_dict(),
        "regime": cfg["regime"],
        "modality": verdict.modality.value,
        "modes": list(verdict.modes),
        "source": verdict.source.value,
        "note": verdict.note,
        "curvature": verdict.curvature,
        "hopf_phase": phase.phase.value,
        "hopf_margin": phase.margin,
    }
    print(json.dumps(obj, sort_keys=True, indent=2))
    if args.out:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        obj["metadata"] = reporting.run_metadata({"params": p.to_dict(), "regime": cfg["regime"]})
        reporting.write_json(out / "modality.json", obj)
        print(f"wrote {out / 'modality.json'}", file=sys.stderr)
    return 0


def _parse_axis(raw) -> tuple[str, np.ndarray]:
    _check_keys(raw, {"name", "min", "max", "points", "log"})
    _require(raw, "name", "min", "max", "points")
    name = raw["name"]
    if name not in ("kappa", "beta", "gamma", "alpha", "sigma_n", "sigma_v", "g"):
        raise ValueError(f"unknown sweep parameter {name!r}")
    lo, hi, n = float(raw["min"]), float(raw["max"]), int(raw["points"])
    if n < 1:
        raise ValueError("axis needs points >= 1")
    if n == 1:
        return name, np.array([lo])
    if not lo < hi:
        raise ValueError(f"axis needs min < max, got [{lo}, {hi}]")
    if raw.get("log", False):
        return name, np.geomspace(lo, hi, n)
    return name, np.linspace(lo, hi, n)


def cmd_sweep(args) -> int:
    cfg = _load_config(args.config)
    _check_keys(cfg, {"params", "axis1", "axis2", "regime", "empirical"})
    _require(cfg, "params", "axis1", "regime")
    base = ModelParams.from_dict(cfg["params"])
    regime = _regime_enum(cfg["regime"])
    name1, vals1 = _parse_axis(cfg["axis1"])
    if cfg.get("axis2") is not None:
        name2, vals2 = _parse_axis(cfg["axis2"])
        if name2 == name1:
            raise ValueError("axis2 must sweep a different parameter than axis1")
    else:
        name2, vals2 = None, np.array([math.nan])

    emp = cfg.get("empirical")
    if emp is not None:
        _check_keys(emp, _SIM_KEYS - {"params"})
        _require(emp, "total_time")

    rows = []
    points = [(v1, v2) for v1 in vals1 for v2 in vals2]
    for index, (v1, v2) in enumerate(points):
        overrides = {name1: float(v1)}
        if name2 is not None:
            overrides[name2] = float(v2)
        p = base.replace(**overrides)
        phase = classify_deterministic_phase(p).phase.value
        analytic = predict_modality(p, regime).modality.value
        empirical = ""
        if emp is not None:
            spec = _sim_spec({**emp, "params": p.to_dict()}, None)
            if args.seed is not None:
                spec = replace(spec, seed=(args.seed + index) % 2**64)
            stats = simulate(spec, threads=_threads(args))
            res = spec.resolved()
            # kappa is the local mean-reversion rate of the mispricing
            n_eff = stats.n_retained * min(1.0, res.subsample_stride * res.dt * 2.0 * p.kappa)
            verdict = count_modes(smooth(stats.hist_delta, n_eff=n_eff))
            empirical = len(verdict.modes)
            print(
                f"point {index + 1}/{len(points)}: {name1}={v1:g}"
                + (f", {name2}={v2:g}" if name2 else "")
                + f" -> {analytic}/{empirical} mode(s)",
                file=sys.stderr,
            )
        rows.append((float(v1), "" if name2 is None else float(v2), phase, analytic, empirical))

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    config = {k: cfg[k] for k in sorted(cfg)}
    meta = reporting.run_metadata(config, seed=args.seed)
    reporting.write_csv(
        out / "sweep.csv",
        ("param1", "param2", "hopf_phase", "analytic_modality", "empirical_modes"),
        rows,
        meta=meta,
    )
    sidecar = {
        "axis1": {"name": name1, "values": [float(v) for v in vals1]},
        "axis2": None if name2 is None else {"name": name2, "values": [float(v) for v in vals2]},
        "regime": cfg["regime"],
        "n_points": len(rows),
        **meta,
    }
    reporting.write_json(out / "sweep.json", sidecar)
    print(f"wrote {out / 'sweep.csv'} ({len(rows)} points)")
    return 0


def cmd_verify(args) -> int:
    from .verify import run_all

    report = run_all()
    for check in report["checks"]:
        status = "PASS" if check["passed"] else "FAIL"
        print(f"{status}  {check['name']:<38s} [{check['elapsed_s']:6.2f} s]  {check['detail']}")
    n_pass = sum(c["passed"] for c in report["checks"])
    print(f"{n_pass}/{len(report['checks'])} checks passed")
    if args.out:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        report["metadata"] = reporting.run_metadata({"command": "verify"})
        reporting.write_json(out / "verify_report.json", report)
        print(f"wrote {out / 'verify_report.json'}", file=sys.stderr)
    return 0 if report["all_passed"] else 1


def cmd_reproduce_fig(args) -> int:
    if args.figure not in FIGURES:
        print(f"error: unknown figure {args.figure}; choose from {sorted(FIGURES)}", file=sys.stderr)
        return 2
    seed = args.seed if args.seed is not None else 2024
    verdict = run_figure(
        args.figure,
        args.out,
        seed=seed,
        threads=_threads(args),
        full=args.full,
        plot=not args.no_plot,
    )
    for panel in verdict["panels"]:
        for check in panel["checks"]:
            status = "PASS" if check["passed"] else "FAIL"
            print(f"{status}  fig{args.figure}/{panel['label']}: {check['name']} = {check['value']}")
    for note in verdict["skipped_panels"]:
        print(f"skipped: {note}")
    print(f"wrote {Path(args.out) / f'fig{args.figure}_verdict.json'}")
    if not verdict["all_passed"]:
        print(
            "note: some desk-scale checks failed; verdicts are recorded in the JSON "
            "(rerun with --full for reference-scale statistics)",
            file=sys.stderr,
        )
    return 0


# ---------------------------------------------------------------- parser

def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="chiarella",
        description="Stochastic market-model toolkit: simulation, stationary laws, modality analysis.",
    )
    ap.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = ap.add_subparsers(dest="command", required=True)

    def add_seed_threads(sp):
        sp.add_argument("--seed", type=_u64, default=None, help="unsigned 64-bit seed override")
        sp.add_argument(
            "--threads",
            type=int,
            default=None,
            help="worker threads (default: CHIARELLA_THREADS env var, then 1)",
        )

    sp = sub.add_parser("simulate", help="Monte-Carlo run from a JSON config")
    sp.add_argument("--config", required=True, help="JSON configuration file")
    sp.add_argument("--out", required=True, help="output directory")
    add_seed_threads(sp)
    sp.set_defaults(func=cmd_simulate)

    sp = sub.add_parser("density", help="analytic stationary density on a grid")
    sp.add_argument("--config", required=True, help="JSON configuration file")
    sp.add_argument("--out", required=True, help="output directory")
    sp.set_defaults(func=cmd_density)

    sp = sub.add_parser("modality", help="analytic peak-count verdict for one parameter point")
    sp.add_argument("--config", required=True, help="JSON configuration file")
    sp.add_argument("--out", default=None, help="optional output directory for modality.json")
    sp.set_defaults(func=cmd_modality)

    sp = sub.add_parser("sweep", help="phase/modality table over 1-2 parameter axes")
    sp.add_argument("--config", required=True, help="JSON configuration file")
    sp.add_argument("--out", required=True, help="output directory")
    add_seed_threads(sp)
    sp.set_defaults(func=cmd_sweep)

    sp = sub.add_parser("verify", help="run the built-in oracle suite")
    sp.add_argument("--out", default=None, help="optional output directory for the report JSON")
    sp.set_defaults(func=cmd_verify)

    sp = sub.add_parser("reproduce-fig", help="reference scenario: simulation vs analytic overlays")
    sp.add_argument("figure", type=int, help="scenario number (1-4)")
    sp.add_argument("--out", required=True, help="output directory")
    sp.add_argument("--full", action="store_true", help="reference horizons (desk scale otherwise)")
    sp.add_argument("--no-plot", action="store_true", help="skip PNG rendering")
    add_seed_threads(sp)
    sp.set_defaults(func=cmd_reproduce_fig)

    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except _REFUSAL as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 4
    except _NUMERICAL as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    except (ValueError, KeyError, TypeError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())

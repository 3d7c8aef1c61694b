"""Deterministic file output: CSV tables and JSON sidecars.

Every artifact is byte-identical across reruns of the same configuration:
floats are written with shortest round-trip ``repr``, JSON keys are sorted,
line endings are LF, and no timestamps or environment details are embedded.
Each file carries the tool version, a SHA-256 over the canonical
configuration, the seed, and the noise-generator name — as ``#``-prefixed
comment lines above the CSV header row, or under a ``metadata`` key in JSON —
so any output can be traced back to the run that made it.
"""

from __future__ import annotations

import hashlib
import json
from pathlib import Path
from typing import Iterable, Sequence

from . import __version__
from .empirics import Histogram1D
from .engine import GENERATOR_NAME, TrajectoryStats

__all__ = [
    "config_hash",
    "run_metadata",
    "write_json",
    "write_csv",
    "write_histogram",
    "write_stats",
    "write_density",
]


def _fmt(v) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        return repr(v)
    return str(v)


def config_hash(config: dict) -> str:
    """SHA-256 over the canonical (sorted, compact) JSON of a configuration."""
    canon = json.dumps(config, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canon.encode()).hexdigest()


def run_metadata(config: dict, seed: int | None = None, generator: str = GENERATOR_NAME) -> dict:
    meta = {
        "tool": "chiarella",
        "version": __version__,
        "config_sha256": config_hash(config),
        "generator": generator,
    }
    if seed is not None:
        meta["seed"] = int(seed)
    return meta


def write_json(path: Path | str, obj: dict) -> None:
    text = json.dumps(obj, sort_keys=True, indent=2) + "\n"
    Path(path).write_text(text, newline="\n")


def write_csv(
    path: Path | str,
    header: Sequence[str],
    rows: Iterable[Sequence],
    meta: dict | None = None,
) -> None:
    """Comma-separated table: optional ``# key: value`` lines, header, rows."""
    lines = []
    if meta is not None:
        lines.extend(f"# {k}: {_fmt(v)}" for k, v in meta.items())
    lines.append(",".join(header))
    lines.extend(",".join(_fmt(v) for v in row) for row in rows)
    Path(path).write_text("\n".join(lines) + "\n", newline="\n")


def write_histogram(
    path: Path | str,
    hist: Histogram1D,
    sidecar: dict | None = None,
    meta: dict | None = None,
) -> None:
    """Histogram as ``bin_center,count,density`` rows plus a JSON sidecar."""
    dens = hist.density()
    rows = [
        (float(c), int(n), float(d))
        for c, n, d in zip(hist.centers, hist.counts, dens)
    ]
    path = Path(path)
    write_csv(path, ("bin_center", "count", "density"), rows, meta=meta)
    if sidecar is not None:
        write_json(path.with_suffix(".json"), sidecar)


def stats_summary(stats: TrajectoryStats) -> dict:
    """JSON-ready moment/metadata summary of a run."""
    def raw(mom):
        return {
            "n": mom[0],
            "sum": mom[1],
            "sum_sq": mom[2],
            "sum_cube": mom[3],
            "sum_quart": mom[4],
        }

    return {
        "run": stats.spec.describe(),
        "n_retained": stats.n_retained,
        "paths": list(stats.paths),
        "raw_moments": {"delta": raw(stats.moments_delta), "m": raw(stats.moments_m)},
    }


def write_stats(stats: TrajectoryStats, out_dir: Path | str, config: dict) -> dict:
    """Write ``delta_hist.csv``, ``m_hist.csv`` and ``stats.json``; returns the summary."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    meta = run_metadata(config, seed=stats.spec.seed)
    summary = stats_summary(stats)
    summary["metadata"] = meta
    write_histogram(out / "delta_hist.csv", stats.hist_delta, {"variable": "delta", **meta}, meta=meta)
    write_histogram(out / "m_hist.csv", stats.hist_m, {"variable": "m", **meta}, meta=meta)
    write_json(out / "stats.json", summary)
    return summary


def write_density(
    path: Path | str,
    grid,
    values,
    sidecar: dict | None = None,
    meta: dict | None = None,
) -> None:
    """Density curve as ``x,p`` rows; the sidecar names variable and law."""
    path = Path(path)
    rows = [(float(x), float(v)) for x, v in zip(grid, values)]
    write_csv(path, ("x", "p"), rows, meta=meta)
    if sidecar is not None:
        write_json(path.with_suffix(".json"), sidecar)

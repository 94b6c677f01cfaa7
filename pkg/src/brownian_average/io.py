"""CSV / JSON writers for density tables, ensembles and verification reports.

Floats are written with 17 significant digits so that files round-trip
exactly; every CSV starts with ``#`` comment lines carrying the run config.
"""

from __future__ import annotations

import csv
import json
from pathlib import Path as FsPath
from typing import Iterable, Mapping, TextIO

import numpy as np

from .montecarlo import DensityTable, WeightedEnsemble
from .oracle import ComparisonReport

__all__ = [
    "fmt",
    "write_density_csv",
    "write_density_json",
    "write_ensemble_csv",
    "write_ensemble_json",
    "write_reports_json",
    "read_density_csv",
    "read_ensemble_csv",
    "weights_sidecar",
]

DENSITY_COLUMNS = ("c", "density", "std_error", "n_paths")


def fmt(x: float) -> str:
    return f"{float(x):.17g}"


def _header(out: TextIO, title: str, config: Mapping[str, object]) -> None:
    out.write(f"# {title}\n")
    for key in sorted(config):
        out.write(f"# {key}={config[key]}\n")


def write_density_csv(table: DensityTable, out: TextIO, config: Mapping[str, object]) -> None:
    _header(out, f"density table ({table.method})", config)
    out.write(",".join(DENSITY_COLUMNS) + "\n")
    for c, d, s in zip(table.c_values, table.densities, table.std_errors):
        out.write(f"{fmt(c)},{fmt(d)},{fmt(s)},{table.n_paths}\n")


def write_density_json(table: DensityTable, out: TextIO, config: Mapping[str, object]) -> None:
    rows = [
        {"c": float(c), "density": float(d), "std_error": float(s), "n_paths": table.n_paths}
        for c, d, s in zip(table.c_values, table.densities, table.std_errors)
    ]
    json.dump({"config": dict(config), "method": table.method, "rows": rows}, out, indent=1, sort_keys=True)
    out.write("\n")


def _csv_rows(path) -> tuple[list[str], list[list[str]]]:
    with open(path, newline="") as fh:
        rows = [r for r in csv.reader(line for line in fh if not line.startswith("#"))]
    return rows[0], rows[1:]


def read_density_csv(path) -> DensityTable:
    header, rows = _csv_rows(path)
    if tuple(header) != DENSITY_COLUMNS:
        raise ValueError(f"unexpected columns {header}")
    arr = np.array(rows, dtype=float).reshape(-1, 4)
    n = int(arr[0, 3]) if arr.size else 0
    return DensityTable(arr[:, 0], arr[:, 1], arr[:, 2], "formula", n)


def read_ensemble_csv(path) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """``(times, values, weights)`` from a paths file and its weights sidecar."""
    header, rows = _csv_rows(path)
    if header != ["path", "t", "value"]:
        raise ValueError(f"unexpected columns {header}")
    arr = np.array(rows, dtype=float).reshape(-1, 3)
    ids = arr[:, 0].astype(int)
    n_paths = int(ids.max()) + 1 if ids.size else 0
    times = arr[ids == 0, 1]
    values = arr[:, 2].reshape(n_paths, times.size)
    _, wrows = _csv_rows(weights_sidecar(path))
    weights = np.array([float(w) for _, w in wrows])
    return times, values, weights


def weights_sidecar(path) -> FsPath:
    p = FsPath(path)
    return p.with_name(p.stem + ".weights.csv")


def _ensemble_stats(ens: WeightedEnsemble) -> dict[str, object]:
    return {
        "c": ens.c,
        "ess": fmt(ens.ess),
        "normalizer": fmt(ens.normalizer),
        "n_proposals": ens.n_proposals,
        "n_retained": len(ens),
    }


def write_ensemble_csv(ens: WeightedEnsemble, out: TextIO, weights_out: TextIO, config: Mapping[str, object]) -> None:
    """Paths as ``path,t,value`` rows, one contiguous block per path; weights go to a sidecar."""
    header = {**config, **_ensemble_stats(ens)}
    _header(out, "weighted ensemble paths", header)
    out.write("path,t,value\n")
    times = [fmt(t) for t in ens.paths.times]
    values = np.atleast_2d(ens.paths.values)
    for i, row in enumerate(values):
        out.write("".join(f"{i},{t},{fmt(v)}\n" for t, v in zip(times, row)))
    _header(weights_out, "weighted ensemble weights", header)
    weights_out.write("path,weight\n")
    for i, w in enumerate(ens.weights):
        weights_out.write(f"{i},{fmt(w)}\n")


def write_ensemble_json(ens: WeightedEnsemble, out: TextIO, config: Mapping[str, object]) -> None:
    payload = {
        "config": dict(config),
        **_ensemble_stats(ens),
        "times": [float(t) for t in ens.paths.times],
        "paths": np.atleast_2d(ens.paths.values).tolist(),
        "weights": ens.weights.tolist(),
    }
    json.dump(payload, out, sort_keys=True)
    out.write("\n")


def write_reports_json(reports: Iterable[tuple[str, ComparisonReport]], out: TextIO) -> None:
    rows = [{"check": group, **r.to_dict()} for group, r in reports]
    json.dump(rows, out, indent=1, sort_keys=True)
    out.write("\n")

"""CSV and metadata files for run bundles.

CSVs are UTF-8 with a header row, '.' decimals and one row per record.
Floats are written with ``repr`` so reruns are bit-identical and files
round-trip exactly.
"""

from __future__ import annotations

import csv
import json
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .noise import TimeGrid
from .stochastic import DensityTrajectory

TRAJECTORY_COLUMNS = ("t", "p1", "p2", "coh_re", "coh_im")
CORRELATION_COLUMNS = ("lag", "estimate", "stderr")
NOISE_COLUMNS = ("t", "value")
FORSTER_COLUMNS = ("omega", "kappa", "rate_r", "converged")


def _fmt(value) -> str:
    if isinstance(value, (bool, np.bool_)):
        return "true" if value else "false"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        return repr(float(value))
    return str(value)


def write_csv(path: Path, columns: Sequence[str], rows: Iterable[Sequence]) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(columns)
        for row in rows:
            writer.writerow([_fmt(v) for v in row])
    return path


def read_csv(path: Path) -> dict[str, np.ndarray]:
    with Path(path).open(encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        rows = list(reader)
    out = {}
    for i, name in enumerate(header):
        col = [r[i] for r in rows]
        if col and col[0] in ("true", "false"):
            out[name] = np.array([c == "true" for c in col])
        else:
            out[name] = np.array([float(c) for c in col])
    return out


def write_trajectory(path: Path, traj: DensityTrajectory) -> Path:
    return write_csv(path, TRAJECTORY_COLUMNS, zip(traj.t, traj.p1, traj.p2, traj.coh_re, traj.coh_im))


def read_trajectory(path: Path, meta: dict | None = None) -> DensityTrajectory:
    cols = read_csv(path)
    t = cols["t"]
    dt = float(t[1] - t[0])
    meta = dict(meta or {})
    return DensityTrajectory(
        TimeGrid(dt, len(t)), cols["p1"], cols["p2"], cols["coh_re"], cols["coh_im"],
        n_traj=int(meta.get("n_traj", 1)), initial_site=int(meta.get("initial_site", 1)), meta=meta,
    )


def write_metadata(path: Path, meta: dict) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(_jsonable(meta), indent=2, sort_keys=True) + "\n", encoding="utf-8")
    return path


def read_metadata(path: Path) -> dict:
    return json.loads(Path(path).read_text(encoding="utf-8"))


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, (np.bool_,)):
        return bool(obj)
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        v = float(obj)
        return v if np.isfinite(v) else str(v)
    if isinstance(obj, complex):
        return [obj.real, obj.imag]
    return obj

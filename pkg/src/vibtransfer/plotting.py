"""Static figures for run bundles.

Never called by the simulation code itself; each bundle ships a ``plot.py``
that calls :func:`render_bundle` on its own directory.
"""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

from .io import read_csv, read_metadata  # noqa: E402

STYLE = {
    "figure.figsize": (6.0, 3.8),
    "font.size": 10,
    "axes.labelsize": 11,
    "axes.spines.top": False,
    "axes.spines.right": False,
    "lines.linewidth": 1.4,
    "legend.frameon": False,
    "savefig.dpi": 150,
    "savefig.bbox": "tight",
}


def _save(fig, path: Path) -> Path:
    fig.savefig(path)
    plt.close(fig)
    return path


def plot_trajectories(files: list[Path], out: Path, title: str = "") -> Path:
    with plt.rc_context(STYLE):
        fig, (ax_p, ax_c) = plt.subplots(1, 2, figsize=(10, 3.8), sharex=True)
        for f in files:
            d = read_csv(f)
            label = f.stem.replace("trajectory_", "").replace("trajectory", "run")
            ax_p.plot(d["t"], d["p1"], label=label)
            ax_c.plot(d["t"], d["coh_re"], label=label)
        ax_p.set_xlabel("t [1/J]")
        ax_p.set_ylabel("P1")
        ax_c.set_xlabel("t [1/J]")
        ax_c.set_ylabel("Re rho12")
        ax_p.legend(fontsize=8)
        if title:
            fig.suptitle(title)
        return _save(fig, out)


def plot_sweep(csv_path: Path, out: Path, parameter: str, metric: str, maxima=()) -> Path:
    d = read_csv(csv_path)
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots()
        ax.plot(d[parameter], d[metric], "o-", ms=3)
        for x, y in maxima:
            ax.axvline(x, color="0.7", ls=":")
        ax.set_xlabel(f"{parameter} [J]")
        ax.set_ylabel(metric)
        return _save(fig, out)


def plot_correlations(bundle: Path, out: Path) -> Path:
    files = sorted(bundle.glob("correlation*.csv"))
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots()
        for f in files:
            d = read_csv(f)
            ax.plot(d["lag"], d["estimate"], label=f.stem)
        kernel = bundle / "kernel.csv"
        if kernel.exists():
            k = read_csv(kernel)
            ax.plot(k["lag"], k["value"], "k--", label="kernel")
        ax.set_xlabel("lag [1/J]")
        ax.set_ylabel("L(t) [J^2]")
        ax.legend(fontsize=8)
        return _save(fig, out)


def render_bundle(bundle: str | Path) -> list[Path]:
    """Write PNG figures for every CSV family found in ``bundle``."""
    bundle = Path(bundle)
    meta = read_metadata(bundle / "metadata.json")
    kind = meta.get("kind", "")
    made = []
    trajs = sorted(bundle.glob("trajectory*.csv"))
    if trajs:
        made.append(plot_trajectories(trajs, bundle / "populations.png", meta.get("preset", kind)))
    if (bundle / "sweep.csv").exists():
        made.append(plot_sweep(bundle / "sweep.csv", bundle / "sweep.png", meta["parameter"], meta["metric"],
                               meta.get("maxima", ())))
    if list(bundle.glob("correlation*.csv")):
        made.append(plot_correlations(bundle, bundle / "correlation.png"))
    return made

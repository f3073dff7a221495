"""Run bundles: configured experiments, parameter sweeps, comparisons and
the figure presets. A bundle is a directory of CSVs plus ``metadata.json``
(enough to rerun it) and a ``plot.py`` that renders the figures."""

from __future__ import annotations

import logging
import time
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from . import __version__
from .config import ConfigError, ExperimentConfig, HeomOptions
from .correlation import CorrelationSpec, KernelTerm, eval_kernel
from .forster import NonConvergent, forster_kappa, sweep_frequency, sweep_maxima
from .heom import BrownianBath, heom_propagate
from .hsr import HsrModel, hsr_propagate
from .io import (CORRELATION_COLUMNS, NOISE_COLUMNS, read_metadata, read_trajectory, write_csv,
                 write_metadata, write_trajectory)
from .noise import TimeGrid, empirical_correlation, factor_for, sample_batch
from .peaks import find_maxima
from .stochastic import (DensityTrajectory, DimerSpec, coherence_lifetime, run_ensemble,
                         transfer_rate)

log = logging.getLogger(__name__)

PRESETS = ("fig1", "fig2", "fig3_coherence", "fig3_optimal", "heom_fig")

PLOT_SCRIPT = '''"""Render this bundle's figures as PNG files next to the CSVs."""
from pathlib import Path

from vibtransfer.plotting import render_bundle

if __name__ == "__main__":
    for path in render_bundle(Path(__file__).resolve().parent):
        print(path)
'''


class GridMismatch(ValueError):
    pass


@dataclass
class Bundle:
    path: Path
    files: list[str] = field(default_factory=list)
    meta: dict = field(default_factory=dict)

    def add(self, path: Path) -> Path:
        self.files.append(Path(path).name)
        return path

    def finish(self, kind: str, **meta) -> "Bundle":
        self.meta.update(meta)
        self.meta.update({"kind": kind, "version": __version__, "files": sorted(self.files)})
        write_metadata(self.path / "metadata.json", self.meta)
        (self.path / "plot.py").write_text(PLOT_SCRIPT, encoding="utf-8")
        return self


def _new_bundle(out: str | Path) -> Bundle:
    path = Path(out)
    path.mkdir(parents=True, exist_ok=True)
    return Bundle(path)


# -- single evaluations ---------------------------------------------------------

def with_parameter(cfg: ExperimentConfig, name: str, value: float) -> ExperimentConfig:
    """Copy of ``cfg`` with one physical parameter replaced."""
    if name == "delta":
        return replace(cfg, dimer=DimerSpec.with_offset(value, cfg.dimer.j_coupling))
    bath = cfg.bath
    if isinstance(bath, CorrelationSpec):
        if name not in ("omega", "gamma0", "tau"):
            raise ConfigError(f"sweep.parameter: {name!r} not valid for a correlation bath")
        first = replace(bath.terms[0], **{name: value})
        return replace(cfg, bath=CorrelationSpec((first,) + bath.terms[1:]))
    if isinstance(bath, BrownianBath):
        key = {"omega": "omega", "lam": "lam", "gamma": "gamma", "beta": "beta"}.get(name)
        if key is None:
            raise ConfigError(f"sweep.parameter: {name!r} not valid for a Brownian bath")
        return replace(cfg, bath=replace(bath, **{key: value}))
    if name == "gamma":
        return replace(cfg, bath=float(value))
    raise ConfigError(f"sweep.parameter: {name!r} not valid for engine {cfg.engine!r}")


def simulate(cfg: ExperimentConfig) -> DensityTrajectory:
    """Density-matrix time series for the dynamical engines."""
    if cfg.engine == "stochastic":
        return run_ensemble(cfg.dimer, cfg.bath, cfg.grid, cfg.n_traj, cfg.base_seed,
                            cfg.initial_site, workers=cfg.workers)
    if cfg.engine == "hsr":
        return hsr_propagate(HsrModel(cfg.dimer, cfg.bath), cfg.grid, cfg.initial_site)
    if cfg.engine == "heom":
        res = heom_propagate(cfg.dimer, cfg.bath, cfg.heom.depth, cfg.heom.dt, cfg.grid.horizon,
                             cfg.initial_site, output_dt=cfg.grid.dt)
        traj = res.trajectory
        traj.meta.update(trace_error=res.trace_error, hermiticity_error=res.hermiticity_error,
                         max_ado_norm=res.max_ado_norm)
        return traj
    raise ConfigError(f"engine: {cfg.engine!r} does not produce trajectories")


def _summary(traj: DensityTrajectory) -> dict:
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        metrics = transfer_rate(traj)
        life = coherence_lifetime(traj)
    out = {
        "rate_r": metrics.rate_r,
        "transferred_at_horizon": metrics.transferred_at_horizon,
        "time_averaged_transferred": float(np.mean(traj.transferred)),
        "divergent": metrics.divergent,
        "coherence_lifetime": life.time,
        "coherence_decayed": life.decayed,
    }
    if traj.p1_stderr is not None:
        out["p1_stderr_at_horizon"] = float(traj.p1_stderr[-1])
    return out


def _evaluate_point(cfg: ExperimentConfig) -> dict:
    if cfg.engine == "forster":
        res = forster_kappa(cfg.dimer, cfg.bath)
        return {"kappa": res.kappa, "rate_r": res.rate_r, "converged": res.converged,
                "integrand_tail": res.integrand_tail}
    traj = simulate(cfg)
    row = _summary(traj)
    for key in ("jitter", "trace_error"):
        if key in traj.meta:
            row[key] = traj.meta[key]
    return row


# -- bundles ------------------------------------------------------------------------

def run(cfg: ExperimentConfig, out: str | Path | None = None) -> Bundle:
    """Run one configured experiment (a sweep if the config has one)."""
    cfg.validate()
    if cfg.sweep is not None:
        return sweep(cfg, out)
    bundle = _new_bundle(out or cfg.outputs)
    started = time.time()
    if cfg.engine == "forster":
        row = _evaluate_point(cfg)
        bundle.add(write_csv(bundle.path / "forster.csv", ("omega", "kappa", "rate_r", "converged"),
                             [(cfg.bath.terms[0].omega, row["kappa"], row["rate_r"], row["converged"])]))
        return bundle.finish("forster", config=cfg.to_dict(), results=row, elapsed=time.time() - started)
    traj = simulate(cfg)
    bundle.add(write_trajectory(bundle.path / "trajectory.csv", traj))
    meta = {k: v for k, v in traj.meta.items() if k not in ("dimer", "bath")}
    return bundle.finish("trajectory", config=cfg.to_dict(), results=_summary(traj), engine_meta=meta,
                         n_traj=traj.n_traj, initial_site=traj.initial_site, elapsed=time.time() - started)


SWEEP_COLUMNS = {
    "forster": ("kappa", "rate_r", "converged"),
    "stochastic": ("transferred_at_horizon", "rate_r", "time_averaged_transferred", "p1_stderr_at_horizon", "divergent"),
    "hsr": ("transferred_at_horizon", "rate_r", "time_averaged_transferred", "divergent"),
    "heom": ("transferred_at_horizon", "rate_r", "time_averaged_transferred", "trace_error"),
}
SWEEP_METRIC = {"forster": "rate_r", "stochastic": "transferred_at_horizon",
                "hsr": "rate_r", "heom": "transferred_at_horizon"}


def sweep_rows(cfg: ExperimentConfig) -> list[dict]:
    if cfg.sweep is None:
        raise ConfigError("sweep: the config has no sweep section")
    name, values = cfg.sweep
    points = [with_parameter(cfg, name, v) for v in values]

    def one(point_cfg):
        try:
            return _evaluate_point(replace(point_cfg, workers=1))
        except NonConvergent as exc:
            log.warning("%s: %s", cfg.engine, exc)
            return {"kappa": float("nan"), "rate_r": float("nan"), "converged": False}

    if cfg.workers > 1:
        with ThreadPoolExecutor(cfg.workers) as pool:
            rows = list(pool.map(one, points))
    else:
        rows = [one(p) for p in points]
    for v, row in zip(values, rows):
        row[name] = v
    return rows


def sweep(cfg: ExperimentConfig, out: str | Path | None = None) -> Bundle:
    cfg.validate()
    if cfg.sweep is None:
        raise ConfigError("sweep: the config has no sweep section")
    name, values = cfg.sweep
    bundle = _new_bundle(out or cfg.outputs)
    started = time.time()
    rows = sweep_rows(cfg)
    cols = (name,) + SWEEP_COLUMNS[cfg.engine]
    bundle.add(write_csv(bundle.path / "sweep.csv", cols, [[r.get(c, float("nan")) for c in cols] for r in rows]))
    metric = SWEEP_METRIC[cfg.engine]
    peaks = find_maxima(values, [r[metric] for r in rows])
    bundle.add(write_csv(bundle.path / "peaks.csv", (name, metric), peaks))
    flags = [r[name] for r in rows if r.get("converged") is False or r.get("divergent")]
    return bundle.finish("sweep", config=cfg.to_dict(), parameter=name, metric=metric,
                         maxima=[list(p) for p in peaks], flagged_points=flags,
                         elapsed=time.time() - started)


def _noise_sample(spec, grid, n_traj, base_seed, max_lag_time, n_sigma):
    factor = factor_for(spec, grid)
    batch = sample_batch(factor, 1, n_traj, base_seed)
    if max_lag_time is None:
        max_lag_time = 5 * max(term.tau for term in spec.terms)
    max_lag = min(grid.n_steps - 1, int(round(max_lag_time / grid.dt)))
    emp = empirical_correlation(batch, 0, max_lag)
    exact = eval_kernel(spec, emp.lag)
    z = np.abs(emp.estimate - exact) / emp.stderr
    report = {"n_traj": n_traj, "base_seed": base_seed, "jitter": factor.jitter, "max_lag": float(emp.lag[-1]),
              "max_z": float(z.max()), "passed": bool(z.max() <= n_sigma), "n_sigma": n_sigma}
    return report, batch, emp, exact


def noise_check(spec: CorrelationSpec, grid: TimeGrid, n_traj: int = 10_000, base_seed: int = 0,
                max_lag_time: float | None = None, out: str | Path | None = None, n_sigma: float = 3.0) -> dict:
    """Sample one site's noise and compare its empirical correlation with the
    kernel at every lag up to ``max_lag_time`` (default 5 tau)."""
    report, batch, emp, exact = _noise_sample(spec, grid, n_traj, base_seed, max_lag_time, n_sigma)
    if out is not None:
        bundle = _new_bundle(out)
        bundle.add(write_csv(bundle.path / "noise.csv", NOISE_COLUMNS, zip(grid.t, batch.samples[0, 0])))
        bundle.add(write_csv(bundle.path / "correlation.csv", CORRELATION_COLUMNS,
                             zip(emp.lag, emp.estimate, emp.stderr)))
        bundle.add(write_csv(bundle.path / "kernel.csv", ("lag", "value"), zip(emp.lag, exact)))
        bundle.finish("noise", bath=spec.to_dict(), grid={"dt": grid.dt, "horizon": grid.horizon}, report=report)
    return report


# -- comparison ---------------------------------------------------------------------

METRICS = ("transfer_rate", "transferred", "time_average", "coherence_lifetime", "populations")


def compare(run_a: DensityTrajectory, run_b: DensityTrajectory, metric: str = "transferred") -> dict:
    """Difference of one metric between two runs on the same grid."""
    if metric not in METRICS:
        raise ValueError(f"metric must be one of {METRICS}")
    if run_a.grid.n_steps != run_b.grid.n_steps or not np.isclose(run_a.grid.dt, run_b.grid.dt):
        raise GridMismatch(f"grids differ: {run_a.grid} vs {run_b.grid}")

    def se(traj):
        return None if traj.p1_stderr is None else traj.p1_stderr

    sa, sb = se(run_a), se(run_b)
    stderr = None
    if metric == "populations":
        diff = run_a.p1 - run_b.p1
        i = int(np.argmax(np.abs(diff)))
        a, b, d = float(run_a.p1[i]), float(run_b.p1[i]), float(np.abs(diff).max())
        if sa is not None or sb is not None:
            stderr = float(np.hypot(0 if sa is None else sa[i], 0 if sb is None else sb[i]))
        return {"metric": metric, "a": a, "b": b, "difference": d, "stderr": stderr, "at": float(run_a.t[i])}
    if metric == "coherence_lifetime":
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            a = coherence_lifetime(run_a).time
            b = coherence_lifetime(run_b).time
    elif metric == "time_average":
        a, b = float(np.mean(run_a.transferred)), float(np.mean(run_b.transferred))
    else:
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            ma, mb = transfer_rate(run_a), transfer_rate(run_b)
        if metric == "transfer_rate":
            a, b = ma.rate_r, mb.rate_r
        else:
            a, b = ma.transferred_at_horizon, mb.transferred_at_horizon
            if sa is not None or sb is not None:
                stderr = float(np.hypot(0 if sa is None else sa[-1], 0 if sb is None else sb[-1]))
    return {"metric": metric, "a": a, "b": b, "difference": a - b, "stderr": stderr}


def load_bundle_trajectory(path: str | Path, name: str = "trajectory.csv") -> DensityTrajectory:
    path = Path(path)
    meta = read_metadata(path / "metadata.json") if (path / "metadata.json").exists() else {}
    csv_path = path / name if path.is_dir() else path
    traj = read_trajectory(csv_path, {"n_traj": meta.get("n_traj", 1),
                                      "initial_site": meta.get("initial_site", 1),
                                      **meta.get("engine_meta", {})})
    return traj


# -- presets ------------------------------------------------------------------------

def _stochastic_cfg(dimer, spec, horizon=20.0, n_traj=10_000, seed=0, dt=0.01, workers=1):
    return ExperimentConfig("stochastic", dimer, spec, TimeGrid.from_horizon(dt, horizon), n_traj, seed,
                            workers=workers).validate()


def preset(name: str, out: str | Path, n_traj: int = 10_000, seed: int = 0, dt: float | None = None,
           horizon: float | None = None, workers: int = 1) -> Bundle:
    """Regenerate one named data set (fixed parameters, see PRESETS)."""
    if name not in PRESETS:
        raise ConfigError(f"preset: unknown name {name!r} (choose from {PRESETS})")
    bundle = _new_bundle(out)
    started = time.time()
    dt_s = dt or 0.01
    if name == "fig1":
        dimer = DimerSpec.with_offset(0.0)
        rows = []
        for w in (0.0, 5.0, 10.0):
            spec = CorrelationSpec.from_sigma(3.0, 1.0, w)
            cfg = _stochastic_cfg(dimer, spec, horizon or 20.0, n_traj, seed, dt_s, workers)
            traj = simulate(cfg)
            tag = f"omega{w:g}"
            bundle.add(write_trajectory(bundle.path / f"trajectory_{tag}.csv", traj))
            rep, batch, emp, _ = _noise_sample(spec, cfg.grid, n_traj, seed, None, 3.0)
            bundle.add(write_csv(bundle.path / f"correlation_{tag}.csv", CORRELATION_COLUMNS,
                                 zip(emp.lag, emp.estimate, emp.stderr)))
            bundle.add(write_csv(bundle.path / f"noise_{tag}.csv", NOISE_COLUMNS,
                                 zip(cfg.grid.t, batch.samples[0, 0])))
            rows.append({"omega": w, **_summary(traj), "noise_max_z": rep["max_z"]})
        return bundle.finish("fig1", preset=name, sigma=3.0, tau=1.0, n_traj=n_traj, base_seed=seed,
                             results=rows, elapsed=time.time() - started)

    if name == "fig2":
        dimer = DimerSpec.with_offset(8.0)
        pts = sweep_frequency(dimer, CorrelationSpec.single(12.0, 3.0), np.arange(1.0, 12.0 + 1e-9, 0.25))
        bundle.add(write_csv(bundle.path / "sweep.csv", ("omega", "kappa", "rate_r", "converged"),
                             [(p.omega, p.kappa, p.rate_r, p.converged) for p in pts]))
        peaks = sweep_maxima(pts)
        bundle.add(write_csv(bundle.path / "peaks.csv", ("omega", "rate_r"), peaks))
        return bundle.finish("sweep", preset=name, parameter="omega", metric="rate_r",
                             maxima=[list(p) for p in peaks], omega_res=dimer.gap,
                             elapsed=time.time() - started)

    if name == "fig3_coherence":
        dimer = DimerSpec.with_offset(8.0)
        rows = []
        for w in (0.0, 4.0, 6.0, 8.0, 9.0):
            cfg = _stochastic_cfg(dimer, CorrelationSpec.single(12.0, 3.0, w), horizon or 20.0, n_traj, seed, dt_s, workers)
            traj = simulate(cfg)
            bundle.add(write_trajectory(bundle.path / f"trajectory_omega{w:g}.csv", traj))
            rows.append({"omega": w, **_summary(traj)})
        bundle.add(write_csv(bundle.path / "summary.csv", ("omega", "coherence_lifetime", "transferred_at_horizon"),
                             [(r["omega"], r["coherence_lifetime"], r["transferred_at_horizon"]) for r in rows]))
        return bundle.finish("fig3_coherence", preset=name, n_traj=n_traj, base_seed=seed, results=rows,
                             elapsed=time.time() - started)

    if name == "fig3_optimal":
        dimer = DimerSpec.with_offset(2.0)
        rows = []
        for case, spec in fig3_cases().items():
            cfg = _stochastic_cfg(dimer, spec, horizon or 30.0, n_traj, seed, dt_s, workers)
            traj = simulate(cfg)
            bundle.add(write_trajectory(bundle.path / f"trajectory_{case}.csv", traj))
            rows.append({"case": case, **_summary(traj)})
        bundle.add(write_csv(bundle.path / "summary.csv", ("case", "time_averaged_transferred", "transferred_at_horizon"),
                             [(r["case"], r["time_averaged_transferred"], r["transferred_at_horizon"]) for r in rows]))
        best = max(rows, key=lambda r: r["time_averaged_transferred"])["case"]
        return bundle.finish("fig3_optimal", preset=name, n_traj=n_traj, base_seed=seed, results=rows,
                             best_case=best, elapsed=time.time() - started)

    # heom_fig
    dimer = DimerSpec.with_offset(8.0)
    bath = heom_fig_bath()
    dt_h = dt or 0.001
    grid = TimeGrid.from_horizon(0.01, horizon or 20.0)
    base = ExperimentConfig("heom", dimer, bath, grid, heom=HeomOptions(6, dt_h)).validate()
    rows = []
    for w in (4.0, 6.0, 8.0, 9.0):
        traj = simulate(with_parameter(base, "omega", w))
        bundle.add(write_trajectory(bundle.path / f"trajectory_omega{w:g}.csv", traj))
        rows.append({"omega": w, **_summary(traj), "trace_error": traj.meta["trace_error"]})
    sweep_cfg = replace(base, sweep=("omega", tuple(np.arange(1.0, 12.0 + 1e-9, 0.5))), workers=workers)
    srows = sweep_rows(sweep_cfg)
    cols = ("omega",) + SWEEP_COLUMNS["heom"]
    bundle.add(write_csv(bundle.path / "sweep.csv", cols, [[r[c] for c in cols] for r in srows]))
    peaks = find_maxima([r["omega"] for r in srows], [r["transferred_at_horizon"] for r in srows])
    bundle.add(write_csv(bundle.path / "peaks.csv", ("omega", "transferred_at_horizon"), peaks))
    return bundle.finish("heom_fig", preset=name, bath=bath.to_dict(), depth=6, dt=dt_h, closure="zero",
                         results=rows, maxima=[list(p) for p in peaks], parameter="omega",
                         metric="transferred_at_horizon", elapsed=time.time() - started)


def fig3_cases() -> dict[str, CorrelationSpec]:
    tau = 6.0
    return {
        "exp_gamma6": CorrelationSpec.single(6.0, tau, 0.0),
        "exp_gamma96": CorrelationSpec.single(96.0, tau, 0.0),
        "osc_gamma6": CorrelationSpec.single(6.0, tau, 2.8),
        "combined": CorrelationSpec((KernelTerm(6.0, tau, 2.8), KernelTerm(2.0, 2.0, 0.0))),
    }


def heom_fig_bath(omega: float = 8.0) -> BrownianBath:
    return BrownianBath(lam=0.2, omega=omega, gamma=2.0 / 3.0, beta=0.1, n_matsubara=1)

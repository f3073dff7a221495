"""Stationary Gaussian colored noise on a uniform grid via Cholesky factorization.

Each site trajectory is ``A @ eta`` with ``A A^T`` the covariance matrix
``L(t_i - t_j)`` and ``eta`` i.i.d. standard normal. Random streams are keyed
on ``(base_seed, site, trajectory)`` so any trajectory can be regenerated on
its own, independent of batching or worker count.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from .correlation import CorrelationSpec, eval_kernel

log = logging.getLogger(__name__)

JITTER_LADDER = (0.0, 1e-12, 1e-10, 1e-8)


class FactorizationFailed(RuntimeError):
    pass


@dataclass(frozen=True)
class TimeGrid:
    dt: float
    n_steps: int

    def __post_init__(self):
        if not self.dt > 0:
            raise ValueError(f"dt must be positive, got {self.dt}")
        if self.n_steps < 2:
            raise ValueError(f"n_steps must be >= 2, got {self.n_steps}")

    @classmethod
    def from_horizon(cls, dt: float, horizon: float) -> "TimeGrid":
        return cls(dt, int(round(horizon / dt)) + 1)

    @property
    def t(self) -> np.ndarray:
        return np.arange(self.n_steps) * self.dt

    @property
    def horizon(self) -> float:
        return (self.n_steps - 1) * self.dt


@dataclass(frozen=True)
class CholeskyFactor:
    lower: np.ndarray
    jitter: float
    grid: TimeGrid


@dataclass
class NoiseBatch:
    samples: np.ndarray  # (n_sites, n_traj, n_steps)
    grid: TimeGrid
    base_seed: int
    jitter: float = 0.0

    @property
    def n_sites(self) -> int:
        return self.samples.shape[0]

    @property
    def n_traj(self) -> int:
        return self.samples.shape[1]


@dataclass
class EmpiricalCorrelation:
    lag: np.ndarray
    estimate: np.ndarray
    stderr: np.ndarray
    meta: dict = field(default_factory=dict)


def build_covariance(spec: CorrelationSpec, grid: TimeGrid) -> np.ndarray:
    t = grid.t
    return eval_kernel(spec, t[:, None] - t[None, :])


def cholesky(cov: np.ndarray, grid: TimeGrid | None = None, ladder=JITTER_LADDER) -> CholeskyFactor:
    """Lower Cholesky factor, adding the smallest diagonal jitter from ``ladder``
    (relative to the zero-lag variance) that lets the factorization succeed."""
    cov = np.asarray(cov, dtype=float)
    n = cov.shape[0]
    scale = float(cov[0, 0])
    for rel in ladder:
        eps = rel * scale
        try:
            lower = np.linalg.cholesky(cov + eps * np.eye(n))
        except np.linalg.LinAlgError:
            continue
        if eps:
            log.info("cholesky needed jitter %.3g (relative %.0e)", eps, rel)
        if grid is None:
            grid = TimeGrid(1.0, max(n, 2))
        return CholeskyFactor(lower, eps, grid)
    raise FactorizationFailed(
        f"covariance of size {n} is not positive definite even with jitter {ladder[-1]:g}*L(0)"
    )


def factor_for(spec: CorrelationSpec, grid: TimeGrid) -> CholeskyFactor:
    return cholesky(build_covariance(spec, grid), grid)


def trajectory_rng(base_seed: int, site: int, traj: int) -> np.random.Generator:
    """Counter-based stream for one (site, trajectory) pair."""
    seq = np.random.SeedSequence(entropy=int(base_seed), spawn_key=(int(site), int(traj)))
    return np.random.Generator(np.random.Philox(seq))


def white_noise(base_seed: int, site: int, traj_indices, n_steps: int) -> np.ndarray:
    """Standard normal matrix of shape (n_steps, len(traj_indices))."""
    out = np.empty((n_steps, len(traj_indices)))
    for col, k in enumerate(traj_indices):
        out[:, col] = trajectory_rng(base_seed, site, k).standard_normal(n_steps)
    return out


def sample_sites(factor: CholeskyFactor, n_sites: int, traj_indices, base_seed: int) -> np.ndarray:
    """Colored noise for a block of trajectories, shape (n_sites, n_steps, len(traj_indices))."""
    n = factor.lower.shape[0]
    return np.stack(
        [factor.lower @ white_noise(base_seed, site, traj_indices, n) for site in range(n_sites)]
    )


def sample_batch(factor: CholeskyFactor, n_sites: int, n_traj: int, base_seed: int) -> NoiseBatch:
    if n_traj < 1:
        raise ValueError("n_traj must be >= 1")
    samples = sample_sites(factor, n_sites, range(n_traj), base_seed)
    return NoiseBatch(np.ascontiguousarray(samples.transpose(0, 2, 1)), factor.grid, base_seed, factor.jitter)


def empirical_correlation(batch: NoiseBatch, site: int = 0, max_lag: int | None = None) -> EmpiricalCorrelation:
    """Cross-trajectory estimate of <x(t_i) x(t_0)> with its standard error."""
    x = batch.samples[site]
    if x.shape[0] == 0:
        raise ValueError("empty batch")
    n = x.shape[1] if max_lag is None else min(max_lag + 1, x.shape[1])
    prod = x[:, :n] * x[:, :1]
    est = prod.mean(axis=0)
    if prod.shape[0] > 1:
        se = prod.std(axis=0, ddof=1) / np.sqrt(prod.shape[0])
    else:
        se = np.full(n, np.inf)
    return EmpiricalCorrelation(np.arange(n) * batch.grid.dt, est, se, {"site": site, "n_traj": batch.n_traj})

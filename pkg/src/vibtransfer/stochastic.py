"""Stochastic Schrödinger dynamics of a dimer with fluctuating site energies.

Every noise realization is propagated exactly over each step with the noise
held at its left-endpoint value, and the ensemble average of the pure-state
projectors gives the reduced density matrix.
"""

from __future__ import annotations

import logging
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy.ndimage import maximum_filter1d

from .correlation import CorrelationSpec
from .noise import CholeskyFactor, TimeGrid, factor_for, sample_sites

log = logging.getLogger(__name__)

DEFAULT_DT = 0.01
DEFAULT_HORIZON = 20.0
CHUNK = 2000


class DivergentIntegral(UserWarning):
    """The transfer-rate integrand has not decayed by the end of the grid."""


class NotDecayed(UserWarning):
    """The coherence envelope never drops below the threshold."""


@dataclass(frozen=True)
class DimerSpec:
    epsilon1: float = 0.0
    epsilon2: float = 0.0
    j_coupling: float = 1.0

    def __post_init__(self):
        if not self.j_coupling > 0:
            raise ValueError("j_coupling must be positive")

    @classmethod
    def with_offset(cls, delta: float, j_coupling: float = 1.0) -> "DimerSpec":
        return cls(float(delta), 0.0, j_coupling)

    @property
    def delta(self) -> float:
        return self.epsilon1 - self.epsilon2

    @property
    def is_homodimer(self) -> bool:
        return self.delta == 0

    @property
    def gap(self) -> float:
        """Excitonic splitting sqrt(delta^2 + 4 J^2)."""
        return float(np.hypot(self.delta, 2.0 * self.j_coupling))

    def hamiltonian(self) -> np.ndarray:
        j = self.j_coupling
        return np.array([[self.epsilon1, -j], [-j, self.epsilon2]], dtype=complex)

    def to_dict(self) -> dict:
        return {"epsilon1": self.epsilon1, "epsilon2": self.epsilon2, "j_coupling": self.j_coupling}


@dataclass
class DensityTrajectory:
    grid: TimeGrid
    p1: np.ndarray
    p2: np.ndarray
    coh_re: np.ndarray
    coh_im: np.ndarray
    n_traj: int = 1
    initial_site: int = 1
    p1_stderr: np.ndarray | None = None
    meta: dict = field(default_factory=dict)

    @property
    def t(self) -> np.ndarray:
        return self.grid.t

    @property
    def coherence(self) -> np.ndarray:
        return self.coh_re + 1j * self.coh_im

    @property
    def transferred(self) -> np.ndarray:
        """Population that has left the initially excited site."""
        return self.p2 if self.initial_site == 1 else self.p1

    def rho(self) -> np.ndarray:
        """Density matrices, shape (n_steps, 2, 2)."""
        out = np.empty((len(self.p1), 2, 2), dtype=complex)
        out[:, 0, 0] = self.p1
        out[:, 1, 1] = self.p2
        out[:, 0, 1] = self.coherence
        out[:, 1, 0] = np.conj(self.coherence)
        return out

    @classmethod
    def from_rho(cls, grid: TimeGrid, rho: np.ndarray, **kwargs) -> "DensityTrajectory":
        return cls(grid, rho[:, 0, 0].real.copy(), rho[:, 1, 1].real.copy(),
                   rho[:, 0, 1].real.copy(), rho[:, 0, 1].imag.copy(), **kwargs)


@dataclass
class TransferMetrics:
    rate_r: float
    transferred_at_horizon: float
    horizon: float
    inverse_rate: float
    divergent: bool = False


@dataclass
class CoherenceLifetime:
    time: float
    decayed: bool
    threshold: float
    window: float


def step_unitary(psi, h_params, dt):
    """Apply exp(-i H dt) for H = [[h1, -J], [-J, h2]].

    ``psi`` has shape (2, ...); ``h1`` and ``h2`` broadcast against the
    trailing axes so a whole block of trajectories steps at once.
    """
    h1, h2, j = h_params
    a, b = psi[0], psi[1]
    mean = 0.5 * (np.asarray(h1) + np.asarray(h2))
    z = 0.5 * (np.asarray(h1) - np.asarray(h2))
    x = -j
    freq = np.sqrt(z * z + x * x)
    c = np.cos(freq * dt)
    # sin(freq dt)/freq, with the freq -> 0 limit dt
    s = dt * np.sinc(freq * dt / np.pi)
    phase = np.exp(-1j * mean * dt)
    new_a = phase * (c * a - 1j * s * (z * a + x * b))
    new_b = phase * (c * b - 1j * s * (x * a - z * b))
    return np.stack([new_a, new_b])


def _propagate_block(dimer: DimerSpec, eps: np.ndarray | None, grid: TimeGrid, n_block: int, initial_site: int):
    n = grid.n_steps
    psi = np.zeros((2, n_block), dtype=complex)
    psi[initial_site - 1] = 1.0
    sums = np.zeros((4, n))  # p1, p1^2, coh re, coh im
    p1 = np.abs(psi[0]) ** 2
    coh = psi[0] * np.conj(psi[1])
    sums[:, 0] = p1.sum(), (p1**2).sum(), coh.real.sum(), coh.imag.sum()
    j = dimer.j_coupling
    for i in range(n - 1):
        if eps is None:
            h1, h2 = dimer.epsilon1, dimer.epsilon2
        else:
            h1 = dimer.epsilon1 + eps[0, i]
            h2 = dimer.epsilon2 + eps[1, i]
        psi = step_unitary(psi, (h1, h2, j), grid.dt)
        p1 = psi[0].real ** 2 + psi[0].imag ** 2
        coh = psi[0] * np.conj(psi[1])
        sums[0, i + 1] = p1.sum()
        sums[1, i + 1] = (p1 * p1).sum()
        sums[2, i + 1] = coh.real.sum()
        sums[3, i + 1] = coh.imag.sum()
    return sums


def run_ensemble(
    dimer: DimerSpec,
    spec: CorrelationSpec | None,
    grid: TimeGrid,
    n_traj: int = 10_000,
    base_seed: int = 0,
    initial_site: int = 1,
    factor: CholeskyFactor | None = None,
    workers: int = 1,
) -> DensityTrajectory:
    """Ensemble-averaged density matrix for ``n_traj`` noise realizations.

    ``spec=None`` switches the noise off. Trajectories are processed in fixed
    blocks whose partial sums are combined in block order, so the result does
    not depend on ``workers``.
    """
    if initial_site not in (1, 2):
        raise ValueError("initial_site must be 1 or 2")
    if n_traj < 1:
        raise ValueError("n_traj must be >= 1")
    if spec is not None and factor is None:
        factor = factor_for(spec, grid)

    blocks = [range(lo, min(lo + CHUNK, n_traj)) for lo in range(0, n_traj, CHUNK)]

    def work(block):
        eps = None if spec is None else sample_sites(factor, 2, block, base_seed)
        return _propagate_block(dimer, eps, grid, len(block), initial_site)

    if workers > 1 and len(blocks) > 1:
        with ThreadPoolExecutor(workers) as pool:
            parts = list(pool.map(work, blocks))
    else:
        parts = [work(b) for b in blocks]
    total = np.zeros_like(parts[0])
    for part in parts:
        total += part

    p1 = total[0] / n_traj
    if n_traj > 1:
        var = np.clip(total[1] / n_traj - p1**2, 0.0, None) * n_traj / (n_traj - 1)
        p1_se = np.sqrt(var / n_traj)
    else:
        p1_se = np.zeros_like(p1)
    meta = {
        "engine": "stochastic",
        "dimer": dimer.to_dict(),
        "bath": None if spec is None else spec.to_dict(),
        "base_seed": base_seed,
        "jitter": 0.0 if factor is None else factor.jitter,
        "period": _default_period(dimer, spec),
    }
    return DensityTrajectory(
        grid, p1, 1.0 - p1, total[2] / n_traj, total[3] / n_traj,
        n_traj=n_traj, initial_site=initial_site, p1_stderr=p1_se, meta=meta,
    )


def _default_period(dimer: DimerSpec, spec: CorrelationSpec | None) -> float:
    if spec is not None and spec.terms[0].omega > 0:
        return 2 * np.pi / spec.terms[0].omega
    return 2 * np.pi / dimer.gap


def transfer_rate(traj, t=None, metric_time: float = DEFAULT_HORIZON, tol: float = 1e-3) -> TransferMetrics:
    """Transfer rate R from R^-1 = int_0^T (1/2 - P(t)) dt.

    ``traj`` is a :class:`DensityTrajectory` or a transferred-population
    sequence sampled at times ``t``.
    """
    if isinstance(traj, DensityTrajectory):
        t = traj.t
        pop = np.asarray(traj.transferred, dtype=float)
    else:
        pop = np.asarray(traj, dtype=float)
        if t is None:
            raise ValueError("sample times are required for a bare population sequence")
        t = np.asarray(t, dtype=float)
        if np.ndim(t) == 0:
            t = np.arange(len(pop)) * float(t)
    inv = float(np.trapezoid(0.5 - pop, t))
    rate = np.inf if inv == 0 else 1.0 / inv
    divergent = abs(0.5 - pop[-1]) > tol
    if divergent:
        warnings.warn(
            f"1/2 - P(T) = {0.5 - pop[-1]:.3g} at T = {t[-1]:g}; horizon too short for a trusted rate",
            DivergentIntegral, stacklevel=2,
        )
    at = min(metric_time, t[-1])
    return TransferMetrics(rate, float(np.interp(at, t, pop)), float(t[-1]), inv, divergent)


def coherence_lifetime(traj: DensityTrajectory, threshold: float = 0.05, window: float | None = None,
                       part: str = "abs") -> CoherenceLifetime:
    """Earliest time after which the coherence envelope stays below ``threshold``.

    The envelope is the running maximum of |rho_12| (``part="abs"``) or of
    |Re rho_12| (``part="re"``) over a centered window of one vibrational
    period.
    """
    if window is None:
        window = traj.meta.get("period") or 2 * np.pi
    if part == "abs":
        signal = np.abs(traj.coherence)
    elif part == "re":
        signal = np.abs(traj.coh_re)
    else:
        raise ValueError(f"part must be 'abs' or 're', got {part!r}")
    width = max(1, int(round(window / traj.grid.dt)))
    env = maximum_filter1d(signal, width, mode="nearest")
    above = np.nonzero(env >= threshold)[0]
    t = traj.t
    if above.size == 0:
        return CoherenceLifetime(0.0, True, threshold, window)
    last = above[-1]
    if last == len(t) - 1:
        warnings.warn("coherence envelope has not decayed by the horizon", NotDecayed, stacklevel=2)
        return CoherenceLifetime(float(t[-1]), False, threshold, window)
    return CoherenceLifetime(float(t[last + 1]), True, threshold, window)

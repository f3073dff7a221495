"""White-noise (Haken-Strobl-Reineker) limit of the dimer.

Coherences decay at the dephasing rate ``gamma`` on top of the coherent
evolution. For independent per-site noise with kernel L the matching rate is
``gamma = int_{-inf}^{inf} L = 2 * sum(gamma0)`` in the Markovian limit.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import expm
from scipy.optimize import minimize_scalar
from scipy.signal import find_peaks

from .noise import TimeGrid
from .stochastic import DensityTrajectory, DimerSpec

PROMINENCE = 1e-3


@dataclass(frozen=True)
class HsrModel:
    dimer: DimerSpec
    gamma: float

    def __post_init__(self):
        if self.gamma < 0:
            raise ValueError("gamma must be non-negative")

    def liouvillian(self) -> np.ndarray:
        """4x4 generator acting on the row-major vectorization (r11, r12, r21, r22)."""
        h = self.dimer.hamiltonian()
        eye = np.eye(2)
        gen = -1j * (np.kron(h, eye) - np.kron(eye, h.T))
        gen += np.diag([0.0, -self.gamma, -self.gamma, 0.0])
        return gen


def markovian_gamma(spec) -> float:
    """Dephasing rate equivalent to independent per-site noise of kernel ``spec``."""
    return 2.0 * sum(term.gamma0 for term in spec.terms)


def hsr_propagate(model: HsrModel, grid: TimeGrid, initial_site: int = 1) -> DensityTrajectory:
    step = expm(model.liouvillian() * grid.dt)
    vec = np.zeros(4, dtype=complex)
    vec[0 if initial_site == 1 else 3] = 1.0
    out = np.empty((grid.n_steps, 4), dtype=complex)
    out[0] = vec
    for i in range(1, grid.n_steps):
        vec = step @ vec
        out[i] = vec
    rho = out.reshape(-1, 2, 2)
    meta = {"engine": "hsr", "dimer": model.dimer.to_dict(), "gamma": model.gamma,
            "period": 2 * np.pi / model.dimer.gap}
    traj = DensityTrajectory.from_rho(grid, rho, n_traj=1, initial_site=initial_site, meta=meta)
    # exact trace: p2 is whatever the populations leave over
    traj.p2 = 1.0 - traj.p1
    return traj


def hsr_eigenvalues(j: float, gamma: float) -> np.ndarray:
    """Closed-form homodimer Liouvillian eigenvalues: 0, -gamma, (-gamma +/- sqrt(gamma^2 - 16 j^2)) / 2."""
    root = np.sqrt(complex(gamma * gamma - 16.0 * j * j))
    return np.array([0.0, -gamma, 0.5 * (-gamma + root), 0.5 * (-gamma - root)], dtype=complex)


def numeric_eigenvalues(model: HsrModel) -> np.ndarray:
    return np.linalg.eigvals(model.liouvillian())


def _oscillates(p1: np.ndarray, prominence: float = PROMINENCE) -> bool:
    """True when P1 has a prominent interior extremum after its starting value.

    Overdamped relaxation is monotone; any undershoot past equilibrium
    produces at least one interior minimum.
    """
    maxima, _ = find_peaks(p1, prominence=prominence)
    minima, _ = find_peaks(-p1, prominence=prominence)
    return len(maxima) + len(minima) > 0


def critical_gamma_estimate(dimer: DimerSpec) -> float:
    return dimer.gap


@dataclass
class CriticalGamma:
    value: float
    estimate: float
    scanned: bool


def relaxation_rate(model: HsrModel) -> float:
    """Slowest nonzero decay rate of the Liouvillian (population relaxation)."""
    rates = -numeric_eigenvalues(model).real
    rates = rates[rates > 1e-12]
    return float(rates.min()) if rates.size else 0.0


def critical_gamma(dimer: DimerSpec, step: float = 0.1) -> CriticalGamma:
    """Dephasing rate at the crossover from underdamped to overdamped relaxation.

    Exact 4J for the homodimer. Otherwise the slowest relaxation rate is
    scanned over gamma in [0.5J, 2 sqrt(delta^2 + 4J^2)] and its maximum
    refined by a bounded scalar search. For the homodimer the same criterion
    lands on 4J.
    """
    estimate = critical_gamma_estimate(dimer)
    if dimer.is_homodimer:
        return CriticalGamma(4.0 * dimer.j_coupling, estimate, False)

    def rate(gamma):
        return relaxation_rate(HsrModel(dimer, gamma))

    gammas = np.arange(0.5, 2 * estimate + step / 2, step)
    best = int(np.argmax([rate(g) for g in gammas]))
    lo = gammas[max(best - 1, 0)]
    hi = gammas[min(best + 1, len(gammas) - 1)]
    res = minimize_scalar(lambda g: -rate(g), bounds=(lo, hi), method="bounded",
                          options={"xatol": 1e-6})
    return CriticalGamma(float(res.x), estimate, True)

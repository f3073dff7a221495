"""Hierarchical equations of motion for a dimer whose energy gap couples to a
damped quantized vibration (Brownian-oscillator spectral density).

The bath correlation function is written as a finite sum of exponentials
C(t) = sum_k c_k exp(-nu_k t): the two underdamped poles plus real Matsubara
terms. Auxiliary density operators (ADOs) are indexed by non-negative
occupation vectors with total at most ``depth``; those beyond are set to zero.
"""

from __future__ import annotations

import itertools
import logging
from dataclasses import dataclass, field

import numpy as np

from .noise import TimeGrid
from .stochastic import DensityTrajectory, DimerSpec

log = logging.getLogger(__name__)

NORM_LIMIT = 1e6
SIGMA_Z = np.diag([1.0, -1.0]).astype(complex)


class OverdampedRegime(ValueError):
    pass


class DepthUnstable(RuntimeError):
    pass


@dataclass(frozen=True)
class BrownianBath:
    lam: float
    omega: float
    gamma: float
    beta: float
    n_matsubara: int = 1

    def __post_init__(self):
        for name in ("lam", "omega", "gamma", "beta"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")
        if self.n_matsubara < 0:
            raise ValueError("n_matsubara must be >= 0")

    @property
    def zeta(self) -> float:
        if self.omega <= self.gamma / 2:
            raise OverdampedRegime(f"omega={self.omega} <= gamma/2={self.gamma / 2}")
        return float(np.sqrt(self.omega**2 - self.gamma**2 / 4))

    def to_dict(self) -> dict:
        return {"lam": self.lam, "omega": self.omega, "gamma": self.gamma,
                "beta": self.beta, "n_matsubara": self.n_matsubara}


@dataclass(frozen=True)
class ExpansionMode:
    coefficient: complex
    rate: complex
    # index of the mode whose rate is the complex conjugate of this one
    partner: int


@dataclass
class HierarchyState:
    depth: int
    modes: list[ExpansionMode]
    indices: list[tuple[int, ...]]
    ados: np.ndarray  # (n_ados, 2, 2)

    @property
    def rho(self) -> np.ndarray:
        return self.ados[0]


@dataclass
class HeomResult:
    trajectory: DensityTrajectory
    state: HierarchyState
    max_ado_norm: float
    trace_error: float
    hermiticity_error: float
    meta: dict = field(default_factory=dict)


def spectral_density(bath: BrownianBath, omega_prime):
    """J(w') = 2 lam gamma w0^2 w' / ((w0^2 - w'^2)^2 + gamma^2 w'^2)."""
    w = np.asarray(omega_prime, dtype=float)
    w0sq = bath.omega**2
    out = 2 * bath.lam * bath.gamma * w0sq * w / ((w0sq - w * w) ** 2 + bath.gamma**2 * w * w)
    return out if out.ndim else float(out)


def bcf_decompose(bath: BrownianBath) -> list[ExpansionMode]:
    """Exponential decomposition of the quantum correlation function.

    C(t) = (1/pi) int_-inf^inf J(w) exp(-i w t) / (1 - exp(-beta w)) dw is
    closed in the lower half plane; the residues at w = +/-zeta - i gamma/2
    give the oscillator modes, those at w = -i 2 pi k / beta the Matsubara
    modes.
    """
    zeta = bath.zeta
    lam, g, beta = bath.lam, bath.gamma, bath.beta
    w0sq = bath.omega**2
    modes = []
    for k, pole in enumerate((zeta - 0.5j * g, -zeta - 0.5j * g)):
        d_denom = -4 * pole * (w0sq - pole**2) + 2 * g * g * pole
        coeff = -2j * (2 * lam * g * w0sq * pole / d_denom) / (1 - np.exp(-beta * pole))
        modes.append(ExpansionMode(complex(coeff), complex(1j * pole), 1 - k))
    for k in range(1, bath.n_matsubara + 1):
        nu = 2 * np.pi * k / beta
        coeff = -4 * lam * g * w0sq * nu / (beta * ((w0sq + nu * nu) ** 2 - g * g * nu * nu))
        modes.append(ExpansionMode(complex(coeff), complex(nu), len(modes)))
    return modes


def correlation_from_modes(modes: list[ExpansionMode], t):
    t = np.asarray(t, dtype=float)
    return sum(m.coefficient * np.exp(-m.rate * t) for m in modes)


def hierarchy_indices(n_modes: int, depth: int) -> list[tuple[int, ...]]:
    """All occupation vectors with total <= depth, ordered by total."""
    out = []
    for level in range(depth + 1):
        out.extend(n for n in itertools.product(range(level + 1), repeat=n_modes) if sum(n) == level)
    return out


def heom_generator(hamiltonian: np.ndarray, coupling: np.ndarray, modes: list[ExpansionMode],
                   depth: int) -> tuple[np.ndarray, list[tuple[int, ...]]]:
    """Dense generator for the stacked, row-major vectorized ADOs.

    d rho_n/dt = -i[H, rho_n] - (sum_k n_k nu_k) rho_n - i sum_k [V, rho_{n+e_k}]
                 - i sum_k n_k (c_k V rho_{n-e_k} - conj(c_kbar) rho_{n-e_k} V)

    where kbar is the mode with rate conj(nu_k), so that the conjugate
    correlation function C*(t) = sum_k conj(c_kbar) exp(-nu_k t).
    """
    dim = hamiltonian.shape[0]
    blk = dim * dim
    eye = np.eye(dim)

    def left(a):
        return np.kron(a, eye)

    def right(a):
        return np.kron(eye, a.T)

    indices = hierarchy_indices(len(modes), depth)
    position = {n: i for i, n in enumerate(indices)}
    coeff = np.array([m.coefficient for m in modes])
    rates = np.array([m.rate for m in modes])
    coeff_bar = np.array([np.conj(modes[m.partner].coefficient) for m in modes])
    free = -1j * (left(hamiltonian) - right(hamiltonian))
    comm = -1j * (left(coupling) - right(coupling))

    gen = np.zeros((len(indices) * blk, len(indices) * blk), dtype=complex)
    for i, n in enumerate(indices):
        rows = slice(i * blk, (i + 1) * blk)
        gen[rows, rows] = free - np.dot(n, rates) * np.eye(blk)
        for k in range(len(modes)):
            up = n[:k] + (n[k] + 1,) + n[k + 1:]
            if up in position:
                j = position[up]
                gen[rows, j * blk:(j + 1) * blk] += comm
            if n[k] > 0:
                down = n[:k] + (n[k] - 1,) + n[k + 1:]
                j = position[down]
                gen[rows, j * blk:(j + 1) * blk] += -1j * n[k] * (coeff[k] * left(coupling) - coeff_bar[k] * right(coupling))
    return gen, indices


def rk4_step_matrix(gen: np.ndarray, dt: float) -> np.ndarray:
    """One classical RK4 step for the linear system y' = gen y, as a matrix."""
    a = gen * dt
    eye = np.eye(len(gen))
    a2 = a @ a
    return eye + a + a2 / 2 + a2 @ a / 6 + a2 @ a2 / 24


def heom_propagate(dimer: DimerSpec, bath: BrownianBath, depth: int = 6, dt: float = 1e-3,
                   horizon: float = 20.0, initial_site: int = 1, output_dt: float = 0.01,
                   coupling: np.ndarray = SIGMA_Z) -> HeomResult:
    """Fixed-step RK4 integration of the hierarchy, sampled every ``output_dt``."""
    stride = int(round(output_dt / dt))
    if stride < 1 or not np.isclose(stride * dt, output_dt):
        raise ValueError("output_dt must be a positive multiple of dt")
    n_out = int(round(horizon / output_dt))
    modes = bcf_decompose(bath)
    gen, indices = heom_generator(dimer.hamiltonian(), coupling, modes, depth)
    step = np.linalg.matrix_power(rk4_step_matrix(gen, dt), stride)

    state = np.zeros(gen.shape[0], dtype=complex)
    state[0 if initial_site == 1 else 3] = 1.0
    rho = np.empty((n_out + 1, 2, 2), dtype=complex)
    rho[0] = state[:4].reshape(2, 2)
    max_norm = 1.0
    for i in range(1, n_out + 1):
        state = step @ state
        rho[i] = state[:4].reshape(2, 2)
        norm = np.abs(state).max()
        max_norm = max(max_norm, norm)
        if not np.isfinite(norm) or norm > NORM_LIMIT:
            raise DepthUnstable(f"ADO norm {norm:.3g} at t={i * output_dt:g}; increase depth")

    grid = TimeGrid(output_dt, n_out + 1)
    meta = {
        "engine": "heom",
        "dimer": dimer.to_dict(),
        "bath": bath.to_dict(),
        "depth": depth,
        "dt": dt,
        "closure": "zero",
        "n_ados": len(indices),
        "modes": [{"c": [m.coefficient.real, m.coefficient.imag], "nu": [m.rate.real, m.rate.imag]} for m in modes],
        "period": 2 * np.pi / bath.omega,
    }
    traj = DensityTrajectory.from_rho(grid, rho, n_traj=1, initial_site=initial_site, meta=meta)
    trace = rho[:, 0, 0] + rho[:, 1, 1]
    herm = np.abs(rho - np.conj(np.transpose(rho, (0, 2, 1)))).max()
    final = HierarchyState(depth, modes, indices, state.reshape(-1, 2, 2))
    return HeomResult(traj, final, float(max_norm), float(np.abs(trace - 1).max()), float(herm), meta)


@dataclass
class ThermalReport:
    populations: tuple[float, float]
    boltzmann: tuple[float, float]
    deviation: float
    drift: float
    settled: bool


def boltzmann_site_populations(dimer: DimerSpec, beta: float) -> tuple[float, float]:
    """Site populations of the thermal state exp(-beta H) / Z of the bare dimer."""
    energies, vecs = np.linalg.eigh(dimer.hamiltonian())
    weights = np.exp(-beta * (energies - energies.min()))
    weights /= weights.sum()
    pops = (np.abs(vecs) ** 2) @ weights
    return float(pops[0]), float(pops[1])


def thermal_check(traj: DensityTrajectory, dimer: DimerSpec, beta: float, window: float = 2.0,
                  drift_tol: float = 1e-3) -> ThermalReport:
    """Compare the late-time site populations with the bare-dimer Boltzmann populations.

    Populations are averaged over the last ``window``; ``settled`` is False
    when P1 still moves by more than ``drift_tol`` across that window.
    """
    t = traj.t
    tail = t >= t[-1] - window
    p1 = traj.p1[tail]
    drift = float(p1.max() - p1.min())
    pops = (float(p1.mean()), float(traj.p2[tail].mean()))
    ref = boltzmann_site_populations(dimer, beta)
    settled = drift < drift_tol
    if not settled:
        log.warning("populations not settled: drift %.3g over last %g", drift, window)
    return ThermalReport(pops, ref, abs(pops[0] - ref[0]), drift, settled)

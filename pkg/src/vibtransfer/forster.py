"""Förster transfer rate for classical colored noise.

    kappa = 2 J^2 Re int_0^inf exp(i delta t - g(t)) dt,   R = 4 kappa

with g the line-shape function of the kernel. The integral is done by
adaptive composite Gauss-Legendre quadrature on panels no wider than half
the fastest oscillation period, truncated where exp(-g) <= 1e-10.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .correlation import CorrelationSpec, effective_damping, line_shape
from .peaks import find_maxima
from .stochastic import DimerSpec

log = logging.getLogger(__name__)

TAIL = 1e-10
MAX_POINTS = 2_000_000
_G_TAIL = -np.log(TAIL)
_NODES_LO = np.polynomial.legendre.leggauss(8)
_NODES_HI = np.polynomial.legendre.leggauss(16)


class NonConvergent(RuntimeError):
    pass


@dataclass
class RateResult:
    kappa: float
    rate_r: float
    integrand_tail: float
    t_max: float
    converged: bool = True


@dataclass
class SweepPoint:
    omega: float
    kappa: float
    rate_r: float
    converged: bool


def white_noise_kappa(dimer: DimerSpec, gamma0: float) -> float:
    """Closed form 2 J^2 gamma0 / (delta^2 + gamma0^2) for g(t) = gamma0 t."""
    j = dimer.j_coupling
    return 2.0 * j * j * gamma0 / (dimer.delta**2 + gamma0**2)


def _gl(f, a, b, rule):
    x, w = rule
    half = 0.5 * (b - a)
    mid = 0.5 * (b + a)
    pts = mid[:, None] + half[:, None] * x[None, :]
    return half * (f(pts) @ w)


def adaptive_gauss(f: Callable, edges: np.ndarray, tol: float, max_rounds: int = 40) -> tuple[float, float]:
    """Integrate ``f`` over consecutive panels, bisecting any panel whose
    8-point and 16-point Gauss-Legendre values disagree by more than its
    share of ``tol``. Returns (integral, estimated error)."""
    a, b = edges[:-1].astype(float), edges[1:].astype(float)
    length = edges[-1] - edges[0]
    total = 0.0
    err = 0.0
    for _ in range(max_rounds):
        lo = _gl(f, a, b, _NODES_LO)
        hi = _gl(f, a, b, _NODES_HI)
        diff = np.abs(hi - lo)
        ok = diff <= tol * (b - a) / length
        total += hi[ok].sum()
        err += diff[ok].sum()
        if ok.all():
            return float(total), float(err)
        a, b = a[~ok], b[~ok]
        m = 0.5 * (a + b)
        a, b = np.concatenate([a, m]), np.concatenate([m, b])
    total += hi[~ok].sum()
    err += diff[~ok].sum()
    log.warning("adaptive quadrature stopped after %d rounds, error %.2g", max_rounds, err)
    return float(total), float(err)


def _asymptote_offset(spec: CorrelationSpec) -> float:
    """Constant c in g(t) ~ gamma_eff t + c for t >> tau."""
    c = 0.0
    for term in spec.terms:
        r = 1.0 / term.tau
        s = r * r + term.omega**2
        c += term.gamma0 * r * (term.omega**2 - r * r) / (s * s)
    return c


def truncation_time(spec: CorrelationSpec, g: Callable | None = None) -> float:
    """Time beyond which exp(-g(t)) stays below 1e-10."""
    g = g or (lambda t: line_shape(spec, t))
    gamma_eff = sum(effective_damping(term) for term in spec.terms)
    if not gamma_eff > 0:
        raise NonConvergent("effective damping is zero")
    t_cap = 1e3 / gamma_eff
    tau_max = max(term.tau for term in spec.terms)
    t_lin = (_G_TAIL + 1.0 - _asymptote_offset(spec)) / gamma_eff
    end = max(40.0 * tau_max, t_lin)
    if end > t_cap:
        if g(t_cap) < _G_TAIL:
            raise NonConvergent(f"exp(-g) has not decayed to {TAIL:g} by t = {t_cap:.3g}")
        end = t_cap
    h = 0.25 * _min_scale(spec, 0.0)
    if end / h > MAX_POINTS:
        raise NonConvergent(f"integration range {end:.3g} is too long to resolve at step {h:.3g}")
    t = np.arange(0.0, end + h, h)
    below = np.nonzero(g(t) < _G_TAIL)[0]
    return float(t[min(below[-1] + 1, len(t) - 1)])


def _min_scale(spec: CorrelationSpec, delta: float) -> float:
    fastest = max([abs(delta)] + [term.omega for term in spec.terms] + [1.0 / term.tau for term in spec.terms])
    return np.pi / fastest


def kappa_from_lineshape(delta: float, j: float, g: Callable, t_max: float, panel: float,
                         tol: float | None = None) -> tuple[float, float]:
    """2 J^2 int_0^t_max cos(delta t) exp(-g(t)) dt for a real line shape ``g``."""
    tol = 1e-10 * 2 * j * j if tol is None else tol
    n_panels = max(1, int(np.ceil(t_max / panel)))
    edges = np.linspace(0.0, t_max, n_panels + 1)
    val, err = adaptive_gauss(lambda t: np.cos(delta * t) * np.exp(-g(t)), edges, tol / (2 * j * j))
    return 2 * j * j * val, 2 * j * j * err


def forster_kappa(dimer: DimerSpec, spec: CorrelationSpec) -> RateResult:
    g = lambda t: line_shape(spec, t)  # noqa: E731
    t_max = truncation_time(spec, g)
    kappa, _ = kappa_from_lineshape(dimer.delta, dimer.j_coupling, g, t_max, _min_scale(spec, dimer.delta))
    tail = float(np.exp(-g(t_max)))
    return RateResult(kappa, 4.0 * kappa, tail, t_max, True)


def sweep_frequency(dimer: DimerSpec, base_spec: CorrelationSpec, omega_values) -> list[SweepPoint]:
    """Förster rate with the first kernel term's frequency set to each omega."""
    omegas = np.asarray(omega_values, dtype=float)
    if omegas.size == 0:
        raise ValueError("omega_values is empty")
    if np.any(np.diff(omegas) <= 0):
        raise ValueError("omega_values must be strictly ascending")
    out = []
    for w in omegas:
        try:
            res = forster_kappa(dimer, base_spec.with_omega(float(w)))
            out.append(SweepPoint(float(w), res.kappa, res.rate_r, True))
        except NonConvergent as exc:
            log.warning("omega=%g: %s", w, exc)
            out.append(SweepPoint(float(w), float("nan"), float("nan"), False))
    return out


def sweep_maxima(points: list[SweepPoint], rel_prominence: float = 0.02) -> list[tuple[float, float]]:
    return find_maxima([p.omega for p in points], [p.rate_r for p in points], rel_prominence)

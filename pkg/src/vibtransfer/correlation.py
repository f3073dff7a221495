"""Classical bath-correlation kernels for damped vibrations.

All energies are in units of the excitonic coupling J and all times in 1/J.
A kernel term is the damped cosine

    L(t) = (gamma0 / tau) * cos(omega t) * exp(-|t| / tau)

and a :class:`CorrelationSpec` is a sum of such terms.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Sequence

import numpy as np


@dataclass(frozen=True)
class KernelTerm:
    gamma0: float
    tau: float
    omega: float = 0.0

    def __post_init__(self):
        if not self.gamma0 > 0:
            raise ValueError(f"gamma0 must be positive, got {self.gamma0}")
        if not self.tau > 0:
            raise ValueError(f"tau must be positive, got {self.tau}")
        if not self.omega >= 0:
            raise ValueError(f"omega must be non-negative, got {self.omega}")

    @property
    def sigma2(self) -> float:
        """Fluctuation amplitude L(0) = gamma0 / tau."""
        return self.gamma0 / self.tau


@dataclass(frozen=True)
class CorrelationSpec:
    terms: tuple[KernelTerm, ...]

    def __post_init__(self):
        object.__setattr__(self, "terms", tuple(self.terms))
        if not self.terms:
            raise ValueError("CorrelationSpec needs at least one kernel term")

    @classmethod
    def single(cls, gamma0: float, tau: float, omega: float = 0.0) -> "CorrelationSpec":
        return cls((KernelTerm(gamma0, tau, omega),))

    @classmethod
    def from_sigma(cls, sigma: float, tau: float, omega: float = 0.0) -> "CorrelationSpec":
        return cls.single(sigma**2 * tau, tau, omega)

    @property
    def sigma2(self) -> float:
        return sum(term.sigma2 for term in self.terms)

    def with_omega(self, omega: float) -> "CorrelationSpec":
        """Copy with the first term's vibrational frequency replaced."""
        first = replace(self.terms[0], omega=omega)
        return CorrelationSpec((first,) + self.terms[1:])

    def scaled(self, factor: float) -> "CorrelationSpec":
        """Copy with every gamma0 multiplied by ``factor``.

        For two sites with independent noise of kernel L, the energy gap
        fluctuates with kernel 2L, i.e. ``spec.scaled(2.0)``.
        """
        return CorrelationSpec(tuple(replace(t, gamma0=t.gamma0 * factor) for t in self.terms))

    def to_dict(self) -> dict:
        return {"terms": [{"gamma0": t.gamma0, "tau": t.tau, "omega": t.omega} for t in self.terms]}

    @classmethod
    def from_dict(cls, data: dict) -> "CorrelationSpec":
        return cls(tuple(KernelTerm(**term) for term in data["terms"]))


def _as_spec(spec) -> CorrelationSpec:
    if isinstance(spec, KernelTerm):
        return CorrelationSpec((spec,))
    return spec


def eval_kernel(spec: CorrelationSpec | KernelTerm, t):
    """Evaluate L(t), even in t. Accepts scalars or arrays."""
    spec = _as_spec(spec)
    at = np.abs(np.asarray(t, dtype=float))
    out = np.zeros_like(at)
    for term in spec.terms:
        out = out + term.sigma2 * np.cos(term.omega * at) * np.exp(-at / term.tau)
    return out if out.ndim else float(out)


def effective_damping(term: KernelTerm) -> float:
    """Integral of one kernel term over [0, inf): gamma0 / (1 + omega^2 tau^2)."""
    return term.gamma0 / (1.0 + (term.omega * term.tau) ** 2)


def line_shape(spec: CorrelationSpec | KernelTerm, t):
    """Line-shape function g(t) = int_0^t (t - s) L(s) ds, closed form per term."""
    spec = _as_spec(spec)
    t = np.asarray(t, dtype=float)
    out = np.zeros_like(t)
    for term in spec.terms:
        r = 1.0 / term.tau
        w = term.omega
        s = r * r + w * w
        decay = np.exp(-t * r)
        bracket = (
            t * r * s
            + (w * w - r * r) * (1.0 - decay * np.cos(w * t))
            - 2.0 * w * r * decay * np.sin(w * t)
        )
        out = out + term.gamma0 * r / (s * s) * bracket
    return out if out.ndim else float(out)


def high_temp_map(lam: float, beta: float, tau: float) -> float:
    """Noise strength gamma0 = 2 lam tau / beta reproducing the classical amplitude 2 lam / beta."""
    if lam < 0 or beta <= 0 or tau <= 0:
        raise ValueError("need lam >= 0, beta > 0 and tau > 0")
    return 2.0 * lam * tau / beta


def reorganization_from_gamma0(gamma0: float, beta: float, tau: float) -> float:
    """Inverse of :func:`high_temp_map`."""
    return beta * gamma0 / (2.0 * tau)


def combined(terms: Sequence[tuple[float, float, float]]) -> CorrelationSpec:
    return CorrelationSpec(tuple(KernelTerm(*t) for t in terms))

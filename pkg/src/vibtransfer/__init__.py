"""Exciton transfer in a dimer driven by underdamped vibrations.

Colored-noise stochastic dynamics, the white-noise (Haken-Strobl-Reineker)
limit, Förster rates and a hierarchical-equations-of-motion solver for a
quantized Brownian-oscillator vibration.
"""

__version__ = "0.1.0"

from .correlation import (CorrelationSpec, KernelTerm, effective_damping, eval_kernel,  # noqa: E402
                          high_temp_map, line_shape)
from .noise import TimeGrid  # noqa: E402
from .stochastic import DensityTrajectory, DimerSpec, run_ensemble, transfer_rate  # noqa: E402

__all__ = [
    "CorrelationSpec", "KernelTerm", "effective_damping", "eval_kernel", "high_temp_map", "line_shape",
    "TimeGrid", "DensityTrajectory", "DimerSpec", "run_ensemble", "transfer_rate",
]

from __future__ import annotations

import numpy as np
from scipy.signal import find_peaks


def find_maxima(x, y, rel_prominence: float = 0.02) -> list[tuple[float, float]]:
    """Interior local maxima of ``y(x)`` with prominence >= rel_prominence * max(y)."""
    y = np.asarray(y, dtype=float)
    x = np.asarray(x, dtype=float)
    ok = np.isfinite(y)
    if not ok.any():
        return []
    floor = rel_prominence * np.nanmax(y)
    idx, _ = find_peaks(np.where(ok, y, -np.inf), prominence=floor)
    return [(float(x[i]), float(y[i])) for i in idx]

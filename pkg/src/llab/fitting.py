"""Power-law exponent fits on log-log data."""

from __future__ import annotations

import numpy as np
from scipy.stats import linregress

from .errors import DegenerateFit

MIN_POINTS = 8


def fit_exponent(lams, values, min_points: int = MIN_POINTS):
    """Least-squares slope of ``log value`` against ``log lam``.

    Returns ``(slope, stderr)``. Needs at least ``min_points`` points with
    positive abscissae and values, and some spread in ``log lam``.
    """
    lams = np.asarray(lams, dtype=float)
    values = np.asarray(values, dtype=float)
    if lams.shape != values.shape or lams.ndim != 1:
        raise DegenerateFit("lams and values must be equal-length 1-D sequences")
    if len(lams) < min_points:
        raise DegenerateFit(f"need >= {min_points} points, got {len(lams)}")
    if np.any(lams <= 0) or np.any(values <= 0):
        raise DegenerateFit("log-log fit needs positive data")
    x = np.log(lams)
    y = np.log(values)
    if np.ptp(x) == 0:
        raise DegenerateFit("zero variance in log lambda")
    if np.ptp(y) == 0:
        return 0.0, 0.0
    res = linregress(x, y)
    return float(res.slope), float(res.stderr)

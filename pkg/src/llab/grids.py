"""One-dimensional sample grids with quadrature weights."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import roots_legendre

from .errors import InvalidParameter


@dataclass(frozen=True, eq=False)
class Grid1D:
    """Nodes and positive weights on ``[lo, hi]``.

    ``periodic`` grids are uniform with the right endpoint omitted.
    ``pole-regular`` grids are Gauss-Legendre, so no node sits on a pole.
    """

    nodes: np.ndarray
    weights: np.ndarray
    boundary: str
    lo: float
    hi: float

    @property
    def size(self):
        return len(self.nodes)

    @property
    def length(self):
        return self.hi - self.lo

    @classmethod
    def periodic(cls, n, period=1.0, lo=0.0):
        if n < 64 or n % 2:
            raise InvalidParameter(f"periodic grids need an even node count >= 64, got {n}")
        h = period / n
        nodes = lo + h * np.arange(n)
        return cls(nodes, np.full(n, h), "periodic", lo, lo + period)

    @classmethod
    def pole_regular(cls, n, L):
        if n < 64:
            raise InvalidParameter(f"pole-regular grids need >= 64 nodes, got {n}")
        x, w = roots_legendre(n)
        return cls(0.5 * L * (x + 1.0), 0.5 * L * w, "pole-regular", 0.0, float(L))

    @classmethod
    def uniform_interior(cls, n, lo, hi):
        """Midpoint grid on an open interval, handy for plotting densities."""
        h = (hi - lo) / n
        nodes = lo + h * (np.arange(n) + 0.5)
        return cls(nodes, np.full(n, h), "pole-regular", lo, hi)

    def integrate(self, values):
        return float(np.dot(self.weights, values))

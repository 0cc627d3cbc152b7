"""Independent reference solvers used only by the tests."""

from __future__ import annotations

import numpy as np
import scipy.linalg as sla
from scipy.special import eval_legendre


def fourier_d2_matrix(n):
    """Dense pseudo-spectral second-derivative matrix on ``n`` uniform
    points of the unit circle (``n`` even)."""
    k = np.fft.fftfreq(n, 1.0 / n)
    mult = -(2 * np.pi * k) ** 2
    eye = np.eye(n)
    return np.real(np.fft.ifft(mult[:, None] * np.fft.fft(eye, axis=0), axis=0))


def liouville_tensor_eigenvalues(U1, U2, n=32, count=20):
    """Lowest eigenvalues of ``-Lap0 u = E (U1(x1) - U2(x2)) u`` by
    collocation on an ``n x n`` tensor grid."""
    x = np.arange(n) / n
    D = fourier_d2_matrix(n)
    eye = np.eye(n)
    A = -(np.kron(D, eye) + np.kron(eye, D))
    A = 0.5 * (A + A.T)
    W = (U1(x)[:, None] - U2(x)[None, :]).ravel()
    s = 1.0 / np.sqrt(W)
    S = s[:, None] * A * s[None, :]
    return sla.eigh(S, eigvals_only=True, subset_by_index=[0, count - 1])


def zonal_harmonic(l, r):
    """Unit-normalised zonal spherical harmonic at polar angle ``r``."""
    return np.sqrt((2 * l + 1) / (4 * np.pi)) * eval_legendre(l, np.cos(r))

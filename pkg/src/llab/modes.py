"""Exact joint eigenfunctions by separation of variables.

* Surfaces of revolution: ``-(a phi')'/a + m^2 phi/a^2 = lam2 phi`` on
  ``[0, L]``, Galerkin with Legendre polynomials (times ``a`` when
  ``m != 0`` so every basis function vanishes at the poles).
* Tori of revolution: ``-psi'' + 4 pi^2 N^2 psi = lam2 a psi``, Fourier
  Galerkin; ``a`` enters as a Toeplitz matrix of its Fourier coefficients.
* Liouville tori: ``f'' + (E U1 - s) f = 0``, ``g'' - (E U2 - s) g = 0``
  solved as intersections of the periodic eigenvalue curves ``s_k(E)`` and
  ``s'_j(E)``.

Eigenvalues are Laplace eigenvalues ``lam2`` throughout; the frequency is
``sqrt(lam2)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp
import scipy.sparse.linalg as spla
from scipy.optimize import brentq

from .errors import (
    CurveTrackingLost,
    GridTooCoarse,
    InvalidParameter,
    PoleRegularityViolated,
    WindowTooWide,
)
from .grids import Grid1D
from .surfaces import LiouvilleTorus, SurfaceOfRevolution, TorusOfRevolution

DEGREE_LADDER = (64, 96, 128, 192, 256, 384, 512, 768, 1024)
LADDER_RTOL = 1e-9
DOUBLING_RTOL = 1e-6
CLUSTER_RTOL = 1e-9
MAX_CURVES = 64
MAX_CANDIDATES = 10_000
RESIDUAL_TOL = 1e-8


@dataclass
class JointEigenpair:
    """One separated mode.

    ``factor`` samples the non-trivial factor on ``grid`` with the angular
    factor ``e^{i q theta}`` (modulus one) carrying no normalisation, so
    ``integral |factor|^2 w = 1`` with ``w = 2 pi a`` (sphere), ``a``
    (torus of revolution). For Liouville tori see ``LiouvilleMode``.
    ``evaluate`` returns the factor at arbitrary points.
    """

    family: str
    lambda2: float
    secondary: float
    qnums: tuple
    grid: Grid1D
    factor: np.ndarray
    evaluate: Callable = field(repr=False)
    norm: float = 1.0
    lambda_convention: str = "eigenvalue"
    model: object = field(default=None, repr=False)

    @property
    def frequency(self):
        return math.sqrt(max(self.lambda2, 0.0))


@dataclass
class LiouvilleMode:
    """A joint root ``(E = lam2, s)`` with both factors.

    ``f`` and ``g`` are individually unit in ``L^2(dx)``; the product
    ``f(x1) g(x2) / sqrt(norm)`` is unit against ``(U1 - U2) dx1 dx2``.
    """

    lambda2: float
    s: float
    hill: tuple
    residuals: tuple
    grid: Grid1D
    f: np.ndarray
    g: np.ndarray
    eval_f: Callable = field(repr=False)
    eval_g: Callable = field(repr=False)
    norm: float = 1.0
    family: str = "liouville"
    lambda_convention: str = "eigenvalue"
    model: object = field(default=None, repr=False)

    @property
    def frequency(self):
        return math.sqrt(max(self.lambda2, 0.0))

    @property
    def qnums(self):
        return self.hill


TwoParamRoot = LiouvilleMode


# ---------------------------------------------------------------------------
# surfaces of revolution
# ---------------------------------------------------------------------------

def legendre_table(x, deg):
    """Orthonormal Legendre values and derivatives, shape ``(len(x), deg+1)``."""
    x = np.asarray(x, dtype=float)
    P = np.zeros((deg + 1, x.size))
    D = np.zeros_like(P)
    P[0] = 1.0
    if deg > 0:
        P[1] = x
        D[1] = 1.0
    for n in range(1, deg):
        P[n + 1] = ((2 * n + 1) * x * P[n] - n * P[n - 1]) / (n + 1)
        D[n + 1] = D[n - 1] + (2 * n + 1) * P[n]
    s = np.sqrt(np.arange(deg + 1) + 0.5)
    return (P * s[:, None]).T, (D * s[:, None]).T


def _sphere_basis(model, m, r, deg):
    L = model.L
    x = 2.0 * r / L - 1.0
    P, D = legendre_table(x, deg)
    D = D * (2.0 / L)
    if m == 0:
        return P, D
    a = model.profile(r)
    da = model.profile.derivative(r, 1)
    return a[:, None] * P, da[:, None] * P + a[:, None] * D


def _sphere_galerkin(model, m, grid, deg, count):
    r, w = grid.nodes, grid.weights
    a = model.profile(r)
    B, dB = _sphere_basis(model, m, r, deg)
    A = (dB * (w * a)[:, None]).T @ dB
    if m:
        A += m * m * ((B * (w / a)[:, None]).T @ B)
    M = (B * (w * a)[:, None]).T @ B
    s, U = np.linalg.eigh(M)
    keep = s > s.max() * 1e-14
    T = U[:, keep] / np.sqrt(s[keep])
    At = T.T @ A @ T
    At = 0.5 * (At + At.T)
    if count > At.shape[0]:
        raise GridTooCoarse(f"degree {deg} resolves only {At.shape[0]} modes")
    _, V = sla.eigh(At, subset_by_index=[0, count - 1])
    C = T @ V
    # Rayleigh quotients from the quadrature: the projected eigenvalues carry
    # roundoff of order eps * cond(A), the quotients only eps * lam2
    phi, dphi = B @ C, dB @ C
    num = (w * a) @ (dphi * dphi)
    if m:
        num += m * m * ((w / a) @ (phi * phi))
    return num / ((w * a) @ (phi * phi)), C


def _ladder(n_modes, cap):
    need = int(1.25 * n_modes) + 32
    degs = [d for d in DEGREE_LADDER if d <= cap]
    start = next((i for i, d in enumerate(degs) if d >= need), None)
    if start is None:
        raise GridTooCoarse(f"grid too coarse for {n_modes} modes (degree cap {cap})")
    return degs[start:]


def solve_surface_rev(model: SurfaceOfRevolution, m: int, count: int,
                      grid: Grid1D | None = None) -> list:
    """Lowest ``count`` eigenpairs of angular sector ``m``.

    The polynomial degree is raised along a fixed ladder until consecutive
    degrees agree to ``1e-9`` relative; failure to agree to ``1e-6`` at the
    largest affordable degree raises ``GridTooCoarse``.
    """
    if count < 1:
        raise InvalidParameter("count must be >= 1")
    grid = grid or Grid1D.pole_regular(4096, model.L)
    if grid.boundary != "pole-regular":
        raise InvalidParameter("surfaces of revolution need a pole-regular grid")
    m = int(m)
    degs = _ladder(count + abs(m), grid.size // 4)
    prev = None
    best = None
    for deg in degs:
        ev, C = _sphere_galerkin(model, abs(m), grid, deg, count)
        if prev is not None:
            rel = np.max(np.abs(ev - prev[0]) / np.maximum(np.abs(ev), 1.0))
            best = (rel, deg, ev, C)
            if rel <= LADDER_RTOL:
                break
        prev = (ev, C)
    if best is None:
        best = (0.0, degs[0], prev[0], prev[1])
    rel, deg, ev, C = best
    if rel > DOUBLING_RTOL:
        raise GridTooCoarse(f"sector m = {m}: degree ladder change {rel:.2e} at degree {deg}")

    out = []
    r = grid.nodes
    Bg, _ = _sphere_basis(model, abs(m), r, deg)
    a = model.profile(r)
    for n in range(count):
        c = C[:, n]
        vals = Bg @ c
        nrm = 2 * np.pi * grid.integrate(vals * vals * a)
        c = c / math.sqrt(nrm)
        vals = vals / math.sqrt(nrm)
        if vals[np.argmax(np.abs(vals))] < 0:
            c, vals = -c, -vals
        if m != 0:
            edge = np.abs(vals[[0, -1]]).max()
            if edge > 1e-3 * np.abs(vals).max() * max(1.0, 1.0 / abs(m)):
                raise PoleRegularityViolated(f"sector m = {m} mode {n} does not vanish at a pole")
        ev_fn = _sphere_evaluator(model, abs(m), deg, c)
        out.append(JointEigenpair("surface-of-revolution", float(ev[n]), m, (m, n), grid, vals,
                                  ev_fn, 1.0, "eigenvalue", model))
    return out


def _sphere_evaluator(model, m, deg, coef):
    def evaluate(r):
        r = np.atleast_1d(np.asarray(r, dtype=float))
        B, _ = _sphere_basis(model, m, r, deg)
        return B @ coef
    return evaluate


# ---------------------------------------------------------------------------
# tori of revolution
# ---------------------------------------------------------------------------

def _fourier_coeffs(f, n):
    """Coefficients ``c_k`` with ``f(x) = sum c_k e^{2 pi i k x}``, from an
    ``n``-point sample; entries below ``1e-15 max`` are dropped."""
    x = np.arange(n) / n
    c = np.fft.fft(f(x)) / n
    c[np.abs(c) < 1e-15 * np.abs(c).max()] = 0.0
    return c


def _toeplitz(coeffs, K, n):
    """Matrix of multiplication by ``sum c_k e^{2 pi i k x}`` on modes
    ``-K..K`` (sparse, only the nonzero bands)."""
    size = 2 * K + 1
    diags, offs = [], []
    for d in range(-min(2 * K, n // 2 - 1), min(2 * K, n // 2 - 1) + 1):
        c = coeffs[d % n]
        if c != 0:
            diags.append(np.full(size - abs(d), c))
            offs.append(-d)
    return sp.diags(diags, offs, shape=(size, size), format="csc")


def _torus_solve(model, N, count, K, n_samples):
    k = np.arange(-K, K + 1)
    ac = _fourier_coeffs(model.conformal, n_samples)
    B = _toeplitz(ac, K, n_samples)
    A = sp.diags(4 * np.pi**2 * (k.astype(float) ** 2 + N * N), format="csc")
    size = 2 * K + 1
    if size <= 1200:
        vals, vecs = sla.eigh(A.toarray(), B.toarray(), subset_by_index=[0, count - 1])
    else:
        # real symmetric when a is even; complex Hermitian in general
        if np.allclose(B.imag.toarray() if np.iscomplexobj(B) else 0.0, 0.0):
            B = B.real
        # fixed start vector: ARPACK's default is random and would break
        # byte-identical reruns
        v0 = np.ones(size, dtype=B.dtype)
        vals, vecs = spla.eigsh(A.astype(B.dtype), k=count, M=B, sigma=-1.0, which="LM", v0=v0)
        o = np.argsort(vals)
        vals, vecs = vals[o], vecs[:, o]
    return np.real(vals), vecs, B, k


def _rotate_clusters(vals, vecs, B, k):
    """Inside each degenerate cluster diagonalise the momentum so that
    constant profiles return pure exponentials."""
    vecs = vecs.astype(complex)
    i = 0
    while i < len(vals):
        j = i + 1
        while j < len(vals) and abs(vals[j] - vals[i]) <= CLUSTER_RTOL * max(1.0, abs(vals[i])):
            j += 1
        if j - i > 1:
            V = vecs[:, i:j]
            Pm = V.conj().T @ (B @ (k[:, None] * V))
            Pm = 0.5 * (Pm + Pm.conj().T)
            mu, W = np.linalg.eigh(Pm)
            order = np.argsort(-mu)  # positive momentum first
            vecs[:, i:j] = V @ W[:, order]
        i = j
    return vecs


def solve_torus_rev(model: TorusOfRevolution, N: int, count: int,
                    grid: Grid1D | None = None, check: bool = True) -> list:
    """Lowest ``count`` eigenpairs of ``-psi'' + 4 pi^2 N^2 psi = lam2 a psi``.

    ``check`` repeats the solve with half the Fourier modes and raises
    ``GridTooCoarse`` if any requested eigenvalue moves by more than 1e-6
    relative.
    """
    if count < 1:
        raise InvalidParameter("count must be >= 1")
    grid = grid or Grid1D.periodic(1024)
    if grid.boundary != "periodic":
        raise InvalidParameter("tori of revolution need a periodic grid")
    n = grid.size
    K = n // 4
    vals, vecs, B, k = _torus_solve(model, N, count, K, n)
    if check:
        Kc = max(K // 2, (count + 1) // 2 + 8)
        coarse, _, _, _ = _torus_solve(model, N, count, Kc, n)
        rel = np.max(np.abs(coarse - vals) / np.maximum(np.abs(vals), 1.0))
        if rel > DOUBLING_RTOL:
            raise GridTooCoarse(f"N = {N}: halving the basis moves lambda by {rel:.2e}")
    vecs = _rotate_clusters(vals, vecs, B, k)
    out = []
    x = grid.nodes
    E = np.exp(2j * np.pi * np.outer(x, k))
    a = model.conformal(x)
    flat = model.conformal.is_constant
    for i in range(count):
        c = vecs[:, i]
        c = c / math.sqrt(np.real(np.vdot(c, B @ c)))
        vals_x = E @ c
        # fix the phase: real and positive at the largest sample
        j = int(np.argmax(np.abs(vals_x)))
        ph = vals_x[j] / abs(vals_x[j])
        c = c / ph
        vals_x = vals_x / ph
        if not flat and np.max(np.abs(vals_x.imag)) < 1e-9 * np.max(np.abs(vals_x)):
            vals_x = vals_x.real.copy()
        out.append(JointEigenpair("torus-of-revolution", float(vals[i]), N, (N, i), grid, vals_x,
                                  _fourier_evaluator(k, c), 1.0, "eigenvalue", model))
    return out


def _fourier_evaluator(k, coef):
    def evaluate(x):
        x = np.atleast_1d(np.asarray(x, dtype=float))
        return np.exp(2j * np.pi * np.outer(x, k)) @ coef
    return evaluate


# ---------------------------------------------------------------------------
# Liouville tori
# ---------------------------------------------------------------------------

class _HillCurves:
    """Periodic eigenvalue curves of ``d^2 + E U1`` (descending) and
    ``-d^2 + E U2`` (ascending) in a Fourier basis."""

    def __init__(self, model, K, n_samples):
        self.K = K
        self.k = np.arange(-K, K + 1)
        lap = 4 * np.pi**2 * self.k.astype(float) ** 2
        self.lap = np.diag(lap)
        self.T1 = _toeplitz(_fourier_coeffs(model.U1, n_samples), K, n_samples).toarray()
        self.T2 = _toeplitz(_fourier_coeffs(model.U2, n_samples), K, n_samples).toarray()
        self._cache = {}

    def s1(self, E, vectors=False):
        M = -self.lap + E * self.T1
        if vectors:
            w, V = np.linalg.eigh(M)
            return w[::-1], V[:, ::-1]
        return np.linalg.eigvalsh(M)[::-1]

    def s2(self, E, vectors=False):
        M = self.lap + E * self.T2
        if vectors:
            return np.linalg.eigh(M)
        return np.linalg.eigvalsh(M)

    def D(self, E, i, j):
        key = float(E)
        if key not in self._cache:
            self._cache[key] = (self.s1(E), self.s2(E))
        a, b = self._cache[key]
        return a[i] - b[j]


def solve_liouville(model: LiouvilleTorus, window, grid: Grid1D | None = None) -> list:
    """All joint roots with ``lam2`` in ``window = (lo, hi)``.

    ``D_kj(E) = s_k(E) - s'_j(E)`` is strictly increasing in ``E`` (its
    derivative is at least ``min U1 - max U2``) and negative at ``E = 0``
    except for ``k = j = 0``, so each curve pair contributes at most one root.
    """
    lo, hi = map(float, window)
    if not hi > lo:
        raise InvalidParameter("window must satisfy lo < hi")
    grid = grid or Grid1D.periodic(256)
    n = grid.size
    K = min(n // 4, 4 * MAX_CURVES)
    H = _HillCurves(model, K, n)
    e_lo = max(lo, -1.0)
    s1_hi, s2_hi = H.s1(hi), H.s2(hi)
    s1_lo, s2_lo = H.s1(e_lo), H.s2(e_lo)
    cand = []
    ncurves = min(MAX_CURVES, 2 * K + 1)
    for i in range(ncurves):
        for j in range(ncurves):
            if s1_hi[i] - s2_hi[j] >= 0 and s1_lo[i] - s2_lo[j] <= 0:
                cand.append((i, j))
    if len(cand) >= MAX_CANDIDATES:
        raise WindowTooWide(f"{len(cand)} candidate crossings in the window")
    if any(i == ncurves - 1 or j == ncurves - 1 for i, j in cand):
        raise WindowTooWide(f"window needs more than {MAX_CURVES} Hill curves per equation")

    x = grid.nodes
    U1 = model.U1(x)
    U2 = model.U2(x)
    E_ = np.exp(2j * np.pi * np.outer(x, H.k))
    roots = []
    for i, j in cand:
        E = brentq(lambda e: H.D(e, i, j), e_lo, hi, xtol=1e-14, rtol=1e-15, maxiter=200)
        if E < lo:
            continue
        s1, V1 = H.s1(E, vectors=True)
        s2, V2 = H.s2(E, vectors=True)
        s = 0.5 * (s1[i] + s2[j])
        f = _real_factor(E_ @ V1[:, i])
        g = _real_factor(E_ @ V2[:, j])
        f /= math.sqrt(np.mean(f * f))
        g /= math.sqrt(np.mean(g * g))
        r1 = _residual(f, E * U1 - s, +1)
        r2 = _residual(g, E * U2 - s, -1)
        if max(r1, r2) > RESIDUAL_TOL:
            raise CurveTrackingLost(f"root ({i}, {j}) at E = {E:.10g} has residuals {r1:.2e}, {r2:.2e}")
        nrm = float(np.mean(f * f * U1) - np.mean(g * g * U2))
        fc = np.fft.fft(f) / n
        gc = np.fft.fft(g) / n
        roots.append(LiouvilleMode(float(E), float(s), (i, j), (r1, r2), grid, f, g,
                                   _fft_evaluator(fc), _fft_evaluator(gc), nrm,
                                   model=model))
    roots.sort(key=lambda r: (r.lambda2, r.hill))
    return roots


def _real_factor(v):
    """Rotate a complex sample vector to its real form."""
    j = int(np.argmax(np.abs(v)))
    v = v / (v[j] / abs(v[j]))
    return v.real.copy()


def _spectral_d2(f):
    n = len(f)
    k = np.fft.fftfreq(n, 1.0 / n)
    return np.real(np.fft.ifft(-(2 * np.pi * k) ** 2 * np.fft.fft(f)))


def _residual(f, q, sign):
    """Relative residual of ``f'' + sign * q f = 0``."""
    d2 = _spectral_d2(f)
    scale = np.max(np.abs(d2)) + np.max(np.abs(q * f)) + 1.0
    return float(np.max(np.abs(d2 + sign * q * f)) / scale)


def _fft_evaluator(coef):
    n = len(coef)
    k = np.fft.fftfreq(n, 1.0 / n)

    def evaluate(x):
        x = np.atleast_1d(np.asarray(x, dtype=float))
        return np.real(np.exp(2j * np.pi * np.outer(x, k)) @ coef)
    return evaluate


def liouville_constant_roots(c1, c2, lam2_max):
    """Closed form for constant ``U1 = c1``, ``U2 = c2``: list of
    ``(lam2, s, k1, k2)`` with ``k1, k2 >= 0``, unsorted multiplicity."""
    out = []
    kmax = int(math.sqrt(lam2_max * (c1 - c2)) / (2 * np.pi)) + 1
    for k1 in range(kmax + 1):
        for k2 in range(kmax + 1):
            lam2 = 4 * np.pi**2 * (k1 * k1 + k2 * k2) / (c1 - c2)
            if lam2 <= lam2_max:
                out.append((lam2, lam2 * c2 + 4 * np.pi**2 * k2 * k2, k1, k2))
    return sorted(out)


# ---------------------------------------------------------------------------
# 2-D assembly
# ---------------------------------------------------------------------------

def clenshaw_curtis(n, lo, hi):
    """Chebyshev-Lobatto nodes and Clenshaw-Curtis weights on ``[lo, hi]``
    with ``n + 1`` points (``n`` even)."""
    if n % 2:
        raise InvalidParameter("Clenshaw-Curtis needs an even n")
    theta = np.pi * np.arange(n + 1) / n
    x = -np.cos(theta)
    w = np.zeros(n + 1)
    v = np.ones(n - 1)
    inner = theta[1:-1]
    for k in range(1, n // 2):
        v -= 2.0 * np.cos(2 * k * inner) / (4 * k * k - 1)
    v -= np.cos(n * inner) / (n * n - 1)
    w[1:-1] = 2.0 * v / n
    w[0] = w[-1] = 1.0 / (n * n - 1)
    h = 0.5 * (hi - lo)
    return lo + h * (x + 1.0), h * w


@dataclass
class SampledMode:
    """A 2-D sampled eigenfunction ``values[i, j] = phi(x_i, y_j)`` with
    volume weights ``dV[i, j]`` (so ``sum |phi|^2 dV = 1``) and a pointwise
    evaluator for refinement."""

    values: np.ndarray
    dV: np.ndarray
    x: np.ndarray
    y: np.ndarray
    evaluate: Callable = field(repr=False)
    lambda2: float = 0.0
    qnums: tuple = ()
    family: str = ""
    angular: str = "exp"
    x_periodic: bool = False
    y_periodic: bool = True
    x_range: tuple = (0.0, 1.0)
    y_range: tuple = (0.0, 1.0)
    model: object = field(default=None, repr=False)

    @property
    def frequency(self):
        return math.sqrt(max(self.lambda2, 0.0))

    @property
    def volume(self):
        return float(self.dV.sum())

    def l2(self):
        return math.sqrt(float(np.sum(np.abs(self.values) ** 2 * self.dV)))


def _angular(kind, q, theta):
    if kind == "exp" or q == 0:
        return np.exp(1j * q * theta) if q != 0 else np.ones_like(theta, dtype=float)
    if kind == "cos":
        return math.sqrt(2.0) * np.cos(q * theta)
    if kind == "sin":
        return math.sqrt(2.0) * np.sin(q * theta)
    raise InvalidParameter(f"unknown angular factor {kind!r}")


def assemble_mode(pair, resolution: int = 256, angular: str = "exp",
                  angular_resolution: int | None = None) -> SampledMode:
    """Sample the full mode on a ``resolution``-sized tensor grid.

    Sphere modes use Chebyshev-Lobatto radial nodes (the poles are sampled)
    with Clenshaw-Curtis weights and a uniform angle; torus modes use
    uniform periodic grids. ``angular`` picks ``e^{iq.}``, ``sqrt2 cos`` or
    ``sqrt2 sin`` for the rotation factor; ``angular_resolution`` (default
    ``resolution``) sets the angular sample count.
    """
    na = angular_resolution or resolution
    if isinstance(pair, LiouvilleMode):
        model = pair.model
        n = resolution
        x = np.arange(n) / n
        f = pair.eval_f(x)
        g = pair.eval_g(x)
        vals = np.outer(f, g) / math.sqrt(pair.norm)
        dV = (model.U1(x)[:, None] - model.U2(x)[None, :]) / (n * n)
        s = math.sqrt(pair.norm)

        def evaluate(x1, x2):
            return pair.eval_f(np.atleast_1d(x1)) * pair.eval_g(np.atleast_1d(x2)) / s
        return SampledMode(vals, dV, x, x.copy(), evaluate, pair.lambda2, pair.hill,
                           "liouville", "none", True, True, model=model)

    model = pair.model
    q = int(pair.secondary)
    if isinstance(model, SurfaceOfRevolution):
        nr = resolution + (resolution % 2)
        r, wr = clenshaw_curtis(nr, 0.0, model.L)
        nt = max(na, 8)
        th = 2 * np.pi * np.arange(nt) / nt
        radial = pair.evaluate(r)
        vals = np.outer(radial, _angular(angular, q, th))
        dV = np.outer(wr * model.profile(r), np.full(nt, 2 * np.pi / nt))

        def evaluate(rr, tt):
            return pair.evaluate(rr) * _angular(angular, q, np.atleast_1d(tt))
        return SampledMode(vals, dV, r, th, evaluate, pair.lambda2, pair.qnums,
                           pair.family, angular, False, True, (0.0, model.L), (0.0, 2 * np.pi),
                           model)

    n = resolution
    x = np.arange(n) / n
    xi = np.arange(na) / na
    prof = pair.evaluate(x)
    ang = _angular(angular, 2 * np.pi * q, xi)
    vals = np.outer(prof, ang)
    dV = np.outer(model.conformal(x), np.ones(na)) / (n * na)

    def evaluate(xx, yy):
        return pair.evaluate(xx) * _angular(angular, 2 * np.pi * q, np.atleast_1d(yy))
    return SampledMode(vals, dV, x, xi, evaluate, pair.lambda2, pair.qnums, pair.family,
                       angular, True, True, model=model)

"""Leading-order WKB quasimodes, sup-norm exponents and mode diagnostics.

Quasimodes live on revolution families where the separated equation in the
profile coordinate has local momentum ``p(x)``:

* sphere: ``p = sqrt(lam^2 - m^2/a^2)``, ``psi = (a p)^{-1/2} cos(Phi - pi/4)``
* torus of revolution: ``p = sqrt(lam^2 a - 4 pi^2 N^2)``, ``psi = p^{-1/2}
  cos(Phi - pi/4)`` for librations, ``p^{-1/2} e^{i Phi}`` for rotations

with ``Phi = int p`` from the lower turning point. Amplitudes inside the
caustic cuts are clamped to the cut-boundary value; no Airy matching.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import cumulative_trapezoid
from scipy.ndimage import gaussian_filter1d
from scipy.optimize import minimize

from .bohr_sommerfeld import MaslovData, bs_state, principal_family
from .classical import MomentValue, classify_level, pushforward_density
from .errors import (
    BSConditionViolated,
    InvalidParameter,
    LevelMismatch,
    ResolutionTooLow,
    SingularTorus,
)
from .fitting import fit_exponent
from .grids import Grid1D
from .modes import JointEigenpair, SampledMode
from .surfaces import LiouvilleTorus, SurfaceOfRevolution, TorusOfRevolution

__all__ = [
    "QuasimodeSpec", "build_wkb", "predict_exponents", "NormRow", "NormReport",
    "compute_norms", "norm_ladder", "fit_exponent", "mass_partition", "density_compare",
    "radial_overlap", "quasimode_residual", "caustic_cut",
]

SUP_REFINE_TOL = 0.01


def caustic_cut(spacing):
    """Width of the excluded band at each turning point."""
    return 3.0 * spacing ** (2.0 / 3.0)


@dataclass
class QuasimodeSpec:
    """A WKB profile on a uniform midpoint grid of the profile coordinate.

    ``values`` is normalised so that ``sum |values|^2 w dx = 1`` with the
    volume weight ``w`` (``2 pi a`` on a sphere, ``a`` on a torus of
    revolution); the angular factor ``e^{i q theta}`` has modulus one.
    """

    model: object
    b: MomentValue
    qnums: tuple
    frequency: float
    x: np.ndarray
    dx: float
    phase: np.ndarray
    amplitude: np.ndarray
    values: np.ndarray
    weight: np.ndarray
    turning: tuple
    maslov: tuple
    eps_caustic: float
    kind: str  # standing | travelling
    angular: int = 0
    support: tuple = field(default=(0.0, 0.0))

    def momentum(self, x):
        return _momentum(self.model, self.frequency, self.angular, x)


def _momentum(model, lam, q, x):
    if isinstance(model, SurfaceOfRevolution):
        a = model.profile(x)
        return np.sqrt(np.clip(lam * lam - (q / a) ** 2, 0.0, None))
    a = model.conformal(x)
    return np.sqrt(np.clip(lam * lam * a - (2 * np.pi * q) ** 2, 0.0, None))


def _volume_weight(model, x):
    if isinstance(model, SurfaceOfRevolution):
        return 2 * np.pi * model.profile(x)
    return model.conformal(x)


def build_wkb(model, qnums, b: MomentValue | None = None, maslov: MaslovData | None = None,
              resolution: int = 8192) -> QuasimodeSpec:
    """Leading-order quasimode for the Bohr-Sommerfeld state ``qnums = (m, n)``.

    ``b`` (optional) must lie on the quantised level; otherwise
    ``BSConditionViolated``. Meridian and singular tori raise
    ``SingularTorus``.
    """
    if isinstance(model, LiouvilleTorus):
        raise InvalidParameter("WKB quasimodes are built on revolution families only")
    m, n = map(int, qnums)
    fam = principal_family(model)
    if maslov is None:
        maslov = fam.default_maslov()
    if isinstance(model, SurfaceOfRevolution) and m == 0:
        raise SingularTorus("m = 0 sits on the meridian torus; use the exact solver")
    st = bs_state(model, fam, maslov, m, n)
    lam = st.lam
    if b is not None and abs(b.c - st.c) > 1e-6 * max(1.0, abs(st.c)):
        raise BSConditionViolated(f"level c = {b.c:.10g} is not the quantised level {st.c:.10g}")
    comp = fam.component(st.c)
    if comp.kind != "lagrangian-torus":
        raise SingularTorus(f"state ({m}, {n}) lies on a {comp.kind}")
    orbit = comp.orbits[0]
    if isinstance(model, SurfaceOfRevolution):
        lo, hi, period = 0.0, model.L, None
    else:
        lo, hi, period = 0.0, 1.0, 1.0
    dx = (hi - lo) / resolution
    x = lo + dx * (np.arange(resolution) + 0.5)
    eps = caustic_cut(dx)
    w = _volume_weight(model, x)
    if orbit.kind == "libration":
        t0, t1 = orbit.lo, orbit.hi
        # unwrap libration intervals that straddle the periodic seam
        xs = x if period is None else np.where(x < t0, x + period, x)
        inside = (xs > t0) & (xs < t1)
        p = _momentum(model, lam, m, xs)
        order = np.argsort(xs)
        phase = np.zeros_like(x)
        phase[order] = cumulative_trapezoid(np.where(inside, p, 0.0)[order], xs[order], initial=0.0)
        xc = np.clip(xs, t0 + eps, t1 - eps)
        pc = _momentum(model, lam, m, xc)
        if isinstance(model, SurfaceOfRevolution):
            amp = 1.0 / np.sqrt(model.profile(xc) * pc)
        else:
            amp = 1.0 / np.sqrt(pc)
        amp = np.where(inside, amp, 0.0)
        vals = amp * np.cos(phase - np.pi / 4)
        kind = "standing"
        turning = (t0, t1)
        shifts = (np.pi / 4, np.pi / 4)
        support = (t0, t1)
    elif orbit.kind == "rotation":
        p = _momentum(model, lam, m, x)
        phase = cumulative_trapezoid(p, x, initial=0.0)
        amp = 1.0 / np.sqrt(p)
        vals = amp * np.exp(1j * (phase - phase[0] + p[0] * (x[0] - lo)))
        kind = "travelling"
        turning = ()
        shifts = ()
        support = (lo, hi)
    else:
        raise SingularTorus(f"orbit kind {orbit.kind} carries no WKB quasimode")
    nrm = math.sqrt(float(np.sum(np.abs(vals) ** 2 * w) * dx))
    return QuasimodeSpec(model, MomentValue(lam, st.c * lam), (m, n), lam, x, dx, phase,
                         amp / nrm, vals / nrm, w, turning, shifts, eps, kind, m, support)


def quasimode_residual(spec: QuasimodeSpec) -> float:
    """Relative residual of the separated operator on ``spec`` outside the
    caustic cuts (sphere and libration profiles).

    For ``psi = A cos(Phi - pi/4)`` with ``Phi' = p`` the first-order terms
    cancel identically and the residual is ``-(A'' + (a'/a) A') cos``; the
    derivatives of the smooth amplitude are taken by finite differences.
    """
    if spec.kind != "standing":
        return 0.0
    x, A = spec.x, spec.amplitude
    t0, t1 = spec.turning
    keep = (x > t0 + spec.eps_caustic) & (x < t1 - spec.eps_caustic)
    dA = np.gradient(A, spec.dx)
    d2A = np.gradient(dA, spec.dx)
    if isinstance(spec.model, SurfaceOfRevolution):
        a = spec.model.profile(x)
        da = spec.model.profile.derivative(x, 1)
        R = -(d2A + da / a * dA) * np.cos(spec.phase - np.pi / 4)
    else:
        R = -d2A * np.cos(spec.phase - np.pi / 4)
    # drop two samples at each edge where one-sided differences apply
    idx = np.flatnonzero(keep)[2:-2]
    w = spec.weight[idx]
    num = math.sqrt(float(np.sum(R[idx] ** 2 * w)))
    den = spec.frequency ** 2 * math.sqrt(float(np.sum(np.abs(spec.values[idx]) ** 2 * w)))
    return num / den


def radial_overlap(spec: QuasimodeSpec, pair: JointEigenpair) -> float:
    """``|<psi_wkb, phi>|`` with both profiles normalised on the same grid."""
    if pair.secondary != spec.angular:
        return 0.0
    phi = pair.evaluate(spec.x)
    w = spec.weight * spec.dx
    ip = np.sum(np.conj(spec.values) * phi * w)
    n1 = math.sqrt(float(np.sum(np.abs(spec.values) ** 2 * w)))
    n2 = math.sqrt(float(np.sum(np.abs(phi) ** 2 * w)))
    return float(abs(ip) / (n1 * n2))


# ---------------------------------------------------------------------------
# exponents and norms
# ---------------------------------------------------------------------------

_SUP = {"none": 0.0, "fold": 0.0, "singular-leaf": 0.25, "blow-down": 0.5}


def predict_exponents(singularity: str, p_list=("inf",)) -> list:
    """Predicted growth exponents per ``p`` in both conventions.

    Finite ``p``: ``(p - 2)/4p`` on singular leaves, ``max(0, 1/2 - 2/p)`` on
    the blow-down (zonal harmonics), 0 otherwise.
    """
    if singularity not in _SUP:
        raise InvalidParameter(f"unknown singularity {singularity!r}")
    rows = []
    for p in p_list:
        if p in ("inf", math.inf) or (isinstance(p, float) and math.isinf(p)):
            e = _SUP[singularity]
            key = "inf"
        else:
            p = float(p)
            if p < 2:
                raise InvalidParameter("p must be >= 2")
            key = p
            if singularity == "singular-leaf":
                e = (p - 2) / (4 * p)
            elif singularity == "blow-down":
                e = max(0.0, 0.5 - 2.0 / p)
            else:
                e = 0.0
        rows.append({"p": key, "frequency": e, "eigenvalue": 0.5 * e})
    return rows


@dataclass
class NormRow:
    lam: float
    lambda2: float
    norms: dict
    sup: float
    sup_grid: float
    qnums: tuple = ()


@dataclass
class NormReport:
    rows: list
    fits: dict
    convention: str

    def to_dict(self):
        return {"convention": self.convention,
                "rows": [{"lambda": r.lam, "lambda2": r.lambda2, "qnums": list(r.qnums),
                          "norms": {str(k): v for k, v in r.norms.items()}, "sup": r.sup}
                         for r in self.rows],
                "fits": {str(k): {"fitted": v[0], "stderr": v[1]} for k, v in self.fits.items()}}


def _refine_sup(mode: SampledMode, i, j):
    """Maximise ``|phi|`` in the cell box around grid node ``(i, j)``."""
    x, y = mode.x, mode.y

    def box(arr, k, periodic, rng):
        h = arr[1] - arr[0] if len(arr) > 1 else 0.0
        lo, hi = arr[k] - h, arr[k] + h
        if not periodic:
            lo = max(lo, arr[0])
            hi = min(hi, arr[-1])
        return lo, hi

    bx = box(x, i, mode.x_periodic, mode.x_range)
    by = box(y, j, mode.y_periodic, mode.y_range)

    def f(z):
        return -float(np.abs(mode.evaluate(np.array([z[0]]), np.array([z[1]]))[0]) ** 2)

    res = minimize(f, np.array([x[i], y[j]]), method="L-BFGS-B", bounds=[bx, by])
    return math.sqrt(max(-res.fun, -f(np.array([x[i], y[j]]))))


def compute_norms(mode: SampledMode, p_list=(2, 4, 6, "inf"), normalized_volume: bool = False,
                  refine: bool = True) -> NormRow:
    """``L^p`` norms against ``dV`` and the refined sup norm.

    With ``normalized_volume`` the measure is scaled to total mass one and
    the mode rescaled to stay unit in ``L^2``.
    """
    absval = np.abs(mode.values)
    dV = mode.dV
    scale = 1.0
    if normalized_volume:
        vol = float(dV.sum())
        dV = dV / vol
        scale = math.sqrt(vol)
    norms = {}
    for p in p_list:
        if p in ("inf", math.inf):
            continue
        p = float(p)
        norms[p] = scale * float(np.sum(absval ** p * dV)) ** (1.0 / p)
    i, j = np.unravel_index(int(np.argmax(absval)), absval.shape)
    grid_sup = float(absval[i, j])
    sup = grid_sup
    if refine:
        sup = max(grid_sup, _refine_sup(mode, i, j))
        if sup > grid_sup * (1 + SUP_REFINE_TOL):
            raise ResolutionTooLow(f"sup refinement moved {grid_sup:.6g} -> {sup:.6g}")
    norms["inf"] = scale * sup
    return NormRow(mode.frequency, mode.lambda2, norms, scale * sup, scale * grid_sup, mode.qnums)


def norm_ladder(rows, convention: str = "eigenvalue") -> NormReport:
    """Fit ``log ||phi||_p`` against ``log lam2`` (eigenvalue) or
    ``log lam`` (frequency) for every ``p`` present in all rows."""
    if convention not in ("eigenvalue", "frequency"):
        raise InvalidParameter("convention must be 'eigenvalue' or 'frequency'")
    xs = [r.lambda2 if convention == "eigenvalue" else r.lam for r in rows]
    keys = set(rows[0].norms)
    for r in rows[1:]:
        keys &= set(r.norms)
    fits = {}
    for k in sorted(keys, key=lambda k: (isinstance(k, str), k if not isinstance(k, str) else 0)):
        fits[k] = fit_exponent(xs, [r.norms[k] for r in rows])
    return NormReport(list(rows), fits, convention)


# ---------------------------------------------------------------------------
# mass distribution
# ---------------------------------------------------------------------------

def _mode_level(mode: SampledMode, model):
    q = mode.qnums[0] if mode.qnums else 0
    if isinstance(model, SurfaceOfRevolution):
        return abs(q) / mode.frequency
    return 2 * np.pi * abs(q) / mode.frequency


def _signature(cls):
    return sorted((c.kind, c.singularity) for c in cls.components)


def _interval_distance(x, lo, hi, period):
    if period is None:
        return np.where(x < lo, lo - x, np.where(x > hi, x - hi, 0.0))
    out = np.full_like(x, np.inf)
    for s in (-period, 0.0, period):
        xs = x + s
        d = np.where(xs < lo, lo - xs, np.where(xs > hi, xs - hi, 0.0))
        out = np.minimum(out, d)
    return out


def mass_partition(mode: SampledMode, classification, model=None) -> dict:
    """Mass of ``mode`` attributed to each torus of ``classification``.

    The angular Fourier sign picks the torus by the sign of its angular
    momentum; the profile coordinate
    is split between distinct annuli by nearest projection interval, or by
    the sign of the profile frequency for rotating components. Returns
    ``{component index: weight}`` with weights summing to one.
    """
    model = model if model is not None else _model_of(mode)
    if isinstance(model, LiouvilleTorus):
        raise InvalidParameter("mass partition is implemented for revolution families")
    tori = [(i, c) for i, c in enumerate(classification.components) if c.is_torus]
    if not tori:
        raise LevelMismatch("level has no tori")
    own = classify_level(model, _mode_level(mode, model), strict=False)
    if _signature(own) != _signature(classification):
        raise LevelMismatch(f"mode level {own.c:.6g} has a different component structure")

    nx, ny = mode.values.shape
    coef = np.fft.fft(mode.values, axis=1) / ny
    qs = np.fft.fftfreq(ny, 1.0 / ny)
    rowmass = mode.dV.sum(axis=1)
    period = None if isinstance(model, SurfaceOfRevolution) else 1.0

    # split of the profile coordinate
    rotating = tori[0][1].orbits and tori[0][1].orbits[0].kind == "rotation"
    if rotating:
        # 2-D spectrum: sign of the profile frequency gives the direction
        spec = np.fft.fft(coef, axis=0) / nx
        kx = np.fft.fftfreq(nx, 1.0 / nx)
        mass = np.abs(spec) ** 2 * rowmass.mean() * nx
        parts = {}
        for i, comp in tori:
            d = comp.orbits[0].direction or 1
            sel_x = (kx * d > 0) | ((kx == 0) & (d > 0))
            parts[i] = _angular_mass(mass[sel_x, :].sum(axis=0), qs, _angle_direction(comp))
    else:
        intervals = sorted({(c.index, c.orbits[0].lo, c.orbits[0].hi) for _, c in tori})
        dist = np.array([_interval_distance(mode.x, lo, hi, period) for _, lo, hi in intervals])
        owner = np.argmin(dist, axis=0)
        parts = {}
        for i, comp in tori:
            k = [t[0] for t in intervals].index(comp.index)
            rows = owner == k
            qmass = (np.abs(coef[rows]) ** 2 * rowmass[rows, None]).sum(axis=0)
            parts[i] = _angular_mass(qmass, qs, _angle_direction(comp))
    total = sum(parts.values())
    return {i: float(v / total) for i, v in parts.items()}


def _angle_direction(comp):
    """Sign of the angular momentum on ``comp`` (0 when unsigned)."""
    return comp.orbits[1].direction if len(comp.orbits) > 1 else 0


def _angular_mass(qmass, qs, direction):
    if direction == 0:
        return float(qmass.sum())
    pos = float(qmass[qs > 0].sum())
    neg = float(qmass[qs < 0].sum())
    zero = float(qmass[qs == 0].sum())
    return (pos if direction > 0 else neg) + 0.5 * zero


def _model_of(mode):
    if mode.model is None:
        raise InvalidParameter("mode carries no model; pass it explicitly")
    return mode.model


# ---------------------------------------------------------------------------
# density comparison
# ---------------------------------------------------------------------------

@dataclass
class DensityComparison:
    correlation: float
    l1: float
    x: np.ndarray = field(repr=False)
    quantum: np.ndarray = field(repr=False)
    classical: np.ndarray = field(repr=False)


def density_compare(pair: JointEigenpair, component, b: MomentValue | None = None,
                    resolution: int = 8192, sigma: float | None = None) -> DensityComparison:
    """Compare the angle-averaged ``|phi|^2`` with the pushforward of the
    torus measure, both as marginals on the profile coordinate.

    Both marginals are smoothed by a Gaussian of width ``sigma`` (default
    ``0.08 L / pi``) and compared outside the caustic cuts by Pearson
    correlation and ``L^1`` distance.
    """
    model = pair.model
    if isinstance(model, SurfaceOfRevolution):
        L, period = model.L, None
    else:
        L, period = 1.0, 1.0
    grid = Grid1D.uniform_interior(resolution, 0.0, L)
    x, dx = grid.nodes, L / resolution
    w = _volume_weight(model, x)
    if b is None:
        b = MomentValue(pair.frequency, _q_moment(model, pair))
    if component.kind != "meridian-torus":
        # the same torus (orientation, index) on the level actually used
        cls = classify_level(model, b.c, strict=False)
        match = [c for c in cls.components
                 if (c.orientation, c.index, c.kind) == (component.orientation, component.index,
                                                          component.kind)]
        if not match:
            raise LevelMismatch(f"no matching torus on level c = {b.c:.10g}")
        component = match[0]
    rho_q = np.abs(pair.evaluate(x)) ** 2 * w
    rho_c = pushforward_density(model, component, b, grid) * w
    rho_c = np.where(np.isfinite(rho_c), rho_c, 0.0)
    rho_q = rho_q / (rho_q.sum() * dx)
    rho_c = rho_c / (rho_c.sum() * dx)
    s = (0.08 * L / np.pi if sigma is None else sigma) / dx
    mode_ = "wrap" if period else "constant"
    A = gaussian_filter1d(rho_q, s, mode=mode_)
    B = gaussian_filter1d(rho_c, s, mode=mode_)
    eps = caustic_cut(dx)
    keep = np.ones_like(x, dtype=bool)
    o = component.orbits[0] if component.orbits else None
    if o is not None and o.kind == "libration":
        xs = x if period is None else np.where(x < o.lo, x + period, x)
        keep = (xs > o.lo + eps) & (xs < o.hi - eps)
    a_, b_ = A[keep], B[keep]
    l1 = float(np.sum(np.abs(a_ - b_)) * dx)
    if np.std(a_) < 1e-12 * max(np.mean(np.abs(a_)), 1e-300) and np.std(b_) < 1e-12 * max(np.mean(np.abs(b_)), 1e-300):
        corr = 1.0
    else:
        corr = float(np.corrcoef(a_, b_)[0, 1])
    return DensityComparison(corr, l1, x[keep], a_, b_)


def _q_moment(model, pair):
    q = pair.secondary
    return float(q) if isinstance(model, SurfaceOfRevolution) else 2 * np.pi * float(q)

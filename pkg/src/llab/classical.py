"""Moment maps, level-set classification, action variables, geodesic flow
and projected torus measures for the three integrable families.

Every family separates into two one-degree-of-freedom problems of the form
``p^2 = F(x) - kappa`` (up to a positive factor):

============================  ==========  ============
family / coordinate           F           kappa
============================  ==========  ============
sphere, r                     a(r)        |c|
torus of revolution, x        a(x)        c^2
Liouville, x1                 U1(x1)      c
Liouville, x2                 -U2(x2)     -c
============================  ==========  ============

where ``c = b2 / b1`` is the normalised level. The second coordinate of a
surface of revolution is an angle swept at constant ``p_theta``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from itertools import product

import numpy as np
from scipy.optimize import brentq
from scipy.special import roots_legendre

from .errors import (
    FiniteComplexityViolated,
    NearCriticalAmbiguity,
    NotATorus,
    QuadratureNonconvergent,
    SingularTorus,
    StepUnstable,
    TurningPointNotBracketed,
    ZeroCovector,
)
from .grids import Grid1D
from .surfaces import (
    LiouvilleTorus,
    SmoothFunctionSpec,
    SurfaceOfRevolution,
    TorusOfRevolution,
)

EPS_LEVEL = 1e-10
EPS_SNAP = 1e-12
M_MAX = 16
DRIFT_TOL = 1e-8
QUAD_RTOL = 1e-13
QUAD_MAX_NODES = 1 << 16


# ---------------------------------------------------------------------------
# phase space
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class PhasePoint:
    """A covector in a chart.

    Charts: ``polar`` (r, theta; p_r, p_theta), ``north``/``south`` (Cartesian
    coordinates centred at a pole of a surface of revolution), ``flat``
    (the periodic coordinates of a torus family).
    """

    chart: str
    q: tuple
    p: tuple

    def __post_init__(self):
        if not all(math.isfinite(v) for v in (*self.q, *self.p)):
            raise ValueError("phase point must be finite")


@dataclass(frozen=True)
class MomentValue:
    b1: float
    b2: float

    @property
    def c(self):
        return self.b2 / self.b1

    def scaled(self, t):
        return MomentValue(t * self.b1, t * self.b2)


def _pole_k(model, s, south=False):
    """k(s) = 1/a^2 - 1/s^2 and its derivative, s = distance to the pole."""
    a = model.profile
    L = model.L
    if s < 1e-2:
        x0, sgn = (L, -1.0) if south else (0.0, 1.0)
        A3 = sgn * float(a.derivative(x0, 3)) / 6.0
        A5 = sgn * float(a.derivative(x0, 5)) / 120.0
        A7 = sgn * float(a.derivative(x0, 7)) / 5040.0
        s2 = s * s
        u = 1.0 + A3 * s2 + A5 * s2 * s2 + A7 * s2**3
        du = 2 * A3 * s + 4 * A5 * s * s2 + 6 * A7 * s * s2 * s2
        num = -(2 * A3 + (A3 * A3 + 2 * A5) * s2 + (2 * A7 + 2 * A3 * A5) * s2 * s2)
        dnum = -(2 * (A3 * A3 + 2 * A5) * s + 4 * (2 * A7 + 2 * A3 * A5) * s * s2)
        return num / u**2, dnum / u**2 - 2 * num * du / u**3
    r = L - s if south else s
    av = float(a(r))
    da = float(a.derivative(r, 1)) * (-1.0 if south else 1.0)
    k = 1.0 / av**2 - 1.0 / s**2
    dk = -2.0 * da / av**3 + 2.0 / s**3
    return k, dk


def to_polar(model, z: PhasePoint) -> PhasePoint:
    if z.chart == "polar":
        return z
    X, Y = z.q
    PX, PY = z.p
    s = math.hypot(X, Y)
    th = math.atan2(Y, X) % (2 * np.pi)
    pth = X * PY - Y * PX
    ps = (X * PX + Y * PY) / s if s > 0 else math.hypot(PX, PY)
    if z.chart == "north":
        return PhasePoint("polar", (s, th), (ps, pth))
    return PhasePoint("polar", (model.L - s, th), (-ps, pth))


def to_pole(model, z: PhasePoint, chart: str) -> PhasePoint:
    r, th = z.q
    pr, pth = z.p
    s, ps = (r, pr) if chart == "north" else (model.L - r, -pr)
    c, sn = math.cos(th), math.sin(th)
    P = (ps * c - pth / s * sn, ps * sn + pth / s * c)
    return PhasePoint(chart, (s * c, s * sn), P)


def _conformal(model, q):
    if isinstance(model, TorusOfRevolution):
        return float(model.conformal(q[0]))
    return float(model.U1(q[0]) - model.U2(q[1]))


def moment_map(model, z: PhasePoint) -> MomentValue:
    """(|xi|_g, second integral) at a phase point."""
    if all(v == 0 for v in z.p):
        raise ZeroCovector("moment map is undefined on the zero section")
    if isinstance(model, SurfaceOfRevolution):
        if z.chart == "polar":
            r = z.q[0]
            pr, pth = z.p
            a = float(model.profile(r))
            b1 = math.sqrt(pr * pr + (pth / a) ** 2)
            return MomentValue(b1, pth)
        X, Y = z.q
        PX, PY = z.p
        pth = X * PY - Y * PX
        k, _ = _pole_k(model, math.hypot(X, Y), z.chart == "south")
        return MomentValue(math.sqrt(PX * PX + PY * PY + pth * pth * k), pth)
    px, py = z.p
    if isinstance(model, TorusOfRevolution):
        a = _conformal(model, z.q)
        return MomentValue(math.sqrt((px * px + py * py) / a), py)
    u1 = float(model.U1(z.q[0]))
    u2 = float(model.U2(z.q[1]))
    b1 = math.sqrt((px * px + py * py) / (u1 - u2))
    S = (u2 * px * px + u1 * py * py) / (u1 - u2)
    return MomentValue(b1, S / b1)


# ---------------------------------------------------------------------------
# one-degree-of-freedom decomposition
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Orbit:
    """A connected orbit of ``p^2 = F(x) - kappa`` on one coordinate.

    ``ends`` are the natures of the two boundary points: ``fold`` (simple
    turning point), ``touch`` (a hyperbolic rest point approached
    asymptotically), ``pole`` or ``none`` for orbits covering the whole
    coordinate. ``direction`` is the sign of the momentum for orbits that
    come in oppositely oriented pairs.
    """

    kind: str  # libration | rotation | homoclinic | heteroclinic | fixed | rest | meridian
    lo: float
    hi: float
    ends: tuple = ("none", "none")
    direction: int = 0


@dataclass(frozen=True)
class Dof:
    """One separated coordinate: ``F`` on a circle or interval."""

    F: SmoothFunctionSpec
    sign: float  # F_eff = sign * F
    lo: float
    hi: float
    periodic: bool

    def __call__(self, x):
        return self.sign * self.F(x)

    def d(self, x, order=1):
        return self.sign * self.F.derivative(x, order)

    def critical(self):
        from .surfaces import critical_structure

        cs = critical_structure(self.F, (self.lo, self.hi), periodic=self.periodic)
        if self.sign > 0:
            return cs, [(p.location, p.value, p.kind) for p in cs.points]
        flip = {"max": "min", "min": "max"}
        return cs, [(p.location, -p.value, flip[p.kind]) for p in cs.points]


def _dofs(model):
    if isinstance(model, SurfaceOfRevolution):
        return (Dof(model.profile, 1.0, 0.0, model.L, False),)
    if isinstance(model, TorusOfRevolution):
        return (Dof(model.conformal, 1.0, 0.0, 1.0, True),)
    return (Dof(model.U1, 1.0, 0.0, 1.0, True), Dof(model.U2, -1.0, 0.0, 1.0, True))


def _kappas(model, c):
    if isinstance(model, SurfaceOfRevolution):
        return (abs(c),)
    if isinstance(model, TorusOfRevolution):
        return (c * c,)
    return (c, -c)


def _crossing(dof, kappa, x0, x1):
    g = lambda x: float(dof(x)) - kappa
    return brentq(g, x0, x1, xtol=1e-15, rtol=4 * np.finfo(float).eps, maxiter=300)


def decompose_dof(dof: Dof, kappa: float, crit=None) -> list:
    """All orbits of ``p^2 = F(x) - kappa`` on one coordinate.

    The profile is monotone between consecutive critical points, so turning
    points are bracketed segment by segment. Critical values are compared
    to ``kappa`` exactly; callers snap near-critical levels beforehand.
    """
    cs, pts = crit if crit is not None else dof.critical()
    P = dof.hi - dof.lo
    if cs.constant:
        v = float(dof(dof.lo))
        if v > kappa:
            return [Orbit("rotation", dof.lo, dof.hi, ("none", "none"), +1),
                    Orbit("rotation", dof.lo, dof.hi, ("none", "none"), -1)]
        if v == kappa:
            return [Orbit("rest", dof.lo, dof.hi)]
        return []

    # nodes: (x, g = F - kappa, kind)
    nodes = [(x, v - kappa, kind) for x, v, kind in pts]
    if not dof.periodic:
        nodes = ([(dof.lo, float(dof(dof.lo)) - kappa, "end")] + nodes
                 + [(dof.hi, float(dof(dof.hi)) - kappa, "end")])
    else:
        neg = [i for i, n in enumerate(nodes) if n[1] < 0]
        touch = [i for i, n in enumerate(nodes) if n[1] == 0 and n[2] == "min"]
        if neg:
            start = neg[0]
        elif touch:
            start = touch[0]
        else:
            # F > kappa everywhere (maxima at the level are impossible here)
            return [Orbit("rotation", dof.lo, dof.hi, ("none", "none"), +1),
                    Orbit("rotation", dof.lo, dof.hi, ("none", "none"), -1)]
        nodes = nodes[start:] + [(x + P, g, k) for x, g, k in nodes[:start]]
        x0, g0, k0 = nodes[0]
        nodes = nodes + [(x0 + P, g0, k0)]

    orbits = []
    open_at = None  # (x, end kind)
    if nodes[0][1] == 0 and nodes[0][2] == "min":
        open_at = (nodes[0][0], "touch")
    for (xa, ga, ka), (xb, gb, kb) in zip(nodes, nodes[1:]):
        if ga < 0 < gb:
            open_at = (_crossing(dof, kappa, xa, xb), "fold")
        elif ga > 0 > gb:
            xr = _crossing(dof, kappa, xa, xb)
            orbits.extend(_close(open_at, (xr, "fold")))
            open_at = None
        if gb == 0:
            if kb == "max":
                orbits.append(Orbit("fixed", xb, xb, ("none", "none")))
            elif kb == "min" and open_at is not None:
                orbits.extend(_close(open_at, (xb, "touch")))
                open_at = (xb, "touch")
    if dof.periodic:
        orbits = [_wrap(o, dof.lo, P) for o in orbits]
        # a periodic walk starting at a touch closes it twice; drop repeats
        uniq = []
        for o in orbits:
            if o not in uniq:
                uniq.append(o)
        orbits = uniq
    return orbits


def _close(start, end):
    (x0, e0), (x1, e1) = start, end
    if e0 == "fold" and e1 == "fold":
        return [Orbit("libration", x0, x1, ("fold", "fold"))]
    if e0 == "touch" and e1 == "touch":
        return [Orbit("heteroclinic", x0, x1, ("touch", "touch"), s) for s in (+1, -1)]
    return [Orbit("homoclinic", x0, x1, (e0, e1))]


def _wrap(o, lo, P):
    if o.lo >= lo + P:
        return Orbit(o.kind, o.lo - P, o.hi - P, o.ends, o.direction)
    return o


def _fix_periodic_kinds(orbits, P):
    out = []
    for o in orbits:
        if o.kind == "heteroclinic" and math.isclose(o.hi - o.lo, P, abs_tol=1e-12):
            o = Orbit("homoclinic", o.lo, o.hi, o.ends, o.direction)
        out.append(o)
    return out


# ---------------------------------------------------------------------------
# level classification
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class LevelComponent:
    kind: str  # lagrangian-torus | circle | cylinder | meridian-torus
    orientation: str  # "+" | "-" | "none"
    projection: tuple  # one (lo, hi) interval per coordinate
    singularity: str  # none | fold | blow-down | singular-leaf
    orbits: tuple = ()
    index: int = 0

    @property
    def is_torus(self):
        return self.kind in ("lagrangian-torus", "meridian-torus")

    def to_dict(self):
        return {"kind": self.kind, "orientation": self.orientation,
                "projection": [list(iv) for iv in self.projection],
                "singularity": self.singularity, "index": self.index,
                "orbits": [o.kind for o in self.orbits]}


@dataclass(frozen=True)
class LevelClassification:
    c: float
    components: tuple
    model_name: str = ""
    edge: str | None = None
    notes: tuple = field(default_factory=tuple)

    @property
    def m_cl(self):
        return len(self.components)

    def tori(self):
        return [i for i, comp in enumerate(self.components) if comp.is_torus]

    def to_dict(self):
        return {"c": self.c, "model": self.model_name, "m_cl": self.m_cl,
                "edge": self.edge, "components": [x.to_dict() for x in self.components],
                "notes": list(self.notes)}


def critical_levels(model) -> list:
    """Nonnegative normalised levels ``c`` at which the level topology changes."""
    levels = set()
    for dof in _dofs(model):
        cs, pts = dof.critical()
        vals = [float(dof(dof.lo))] if cs.constant else [v for _, v, _ in pts]
        for v in vals:
            if isinstance(model, SurfaceOfRevolution):
                levels.add(v)
            elif isinstance(model, TorusOfRevolution):
                if v > 0:
                    levels.add(math.sqrt(v))
            else:
                levels.add(v * dof.sign)
    if isinstance(model, SurfaceOfRevolution):
        levels.add(0.0)
    return sorted(levels)


def _snap(model, c, strict=True):
    """Return (c_snapped, edge_label). Raises when c is suspiciously close
    to, but not at, a critical level (unless ``strict`` is off)."""
    key = abs(c) if not isinstance(model, LiouvilleTorus) else c
    for v in critical_levels(model):
        d = abs(key - v)
        if d <= EPS_SNAP * max(1.0, abs(v)):
            snapped = math.copysign(v, c) if key != c else v
            return snapped, v
        if d < EPS_LEVEL and strict:
            raise NearCriticalAmbiguity(
                f"c = {c!r} is within {d:.2e} of critical level {v!r}; pass the exact "
                f"value from critical_levels() for the edge row")
    return c, None


def _component(model, orbs, tag_dir, index):
    kinds = [o.kind for o in orbs]
    proj = tuple((o.lo, o.hi) for o in orbs)
    if "fixed" in kinds:
        kind, sing = "circle", "singular-leaf"
    elif any(k in ("homoclinic", "heteroclinic") for k in kinds):
        kind = "cylinder"
        sing = "fold" if any("fold" in o.ends for o in orbs) else "none"
    else:
        kind = "lagrangian-torus"
        sing = "fold" if any("fold" in o.ends for o in orbs) else "none"
    return LevelComponent(kind, tag_dir, proj, sing, tuple(orbs), index)


def classify_level(model, c: float, m_max: int = M_MAX, strict: bool = True) -> LevelClassification:
    """Decompose the level ``P^{-1}(1, c)`` into components.

    Surfaces of revolution: the radial orbits times the sign of ``p_theta``
    (a single meridian torus at ``c = 0`` on a sphere). Liouville tori: the
    product of the orbits of both coordinates. Separatrix levels list the
    cylinders only; the hyperbolic circles they accumulate on are omitted.
    Internal sweeps pass ``strict=False`` to classify levels arbitrarily
    close to critical ones as the open row they belong to.
    """
    c, edge = _snap(model, float(c), strict)
    dofs = _dofs(model)
    kappas = _kappas(model, c)
    if isinstance(model, SurfaceOfRevolution) and c == 0:
        meridian = Orbit("meridian", 0.0, model.L, ("pole", "pole"))
        comps = (LevelComponent("meridian-torus", "none",
                                ((0.0, model.L), (0.0, 2 * np.pi)), "blow-down",
                                (meridian,), 0),)
        return _finish(model, c, comps, edge, m_max)

    per_dof = []
    for dof, kappa in zip(dofs, kappas):
        orbs = decompose_dof(dof, kappa)
        if dof.periodic:
            orbs = _fix_periodic_kinds(orbs, dof.hi - dof.lo)
        per_dof.append(orbs)

    if len(dofs) == 1:
        angle_lo, angle_hi = (0.0, 2 * np.pi) if isinstance(model, SurfaceOfRevolution) else (0.0, 1.0)
        signs = (+1, -1) if c != 0 else (0,)
        angle_orbits = [Orbit("rotation", angle_lo, angle_hi, ("none", "none"), s) for s in signs]
        per_dof.append(angle_orbits)

    raw = [tuple(combo) for combo in product(*per_dof)]
    comps = _label(model, raw)
    return _finish(model, c, tuple(comps), edge, m_max)


def _label(model, raw):
    """Pair components under the involution and assign +/- tags."""
    def dirs(orbs):
        return tuple(o.direction for o in orbs)

    def flipped(orbs):
        return tuple(Orbit(o.kind, o.lo, o.hi, o.ends, -o.direction) for o in orbs)

    seen = set()
    out = []
    k = 0
    for orbs in raw:
        if orbs in seen:
            continue
        partner = flipped(orbs)
        if partner == orbs or partner not in raw:
            out.append(_component(model, list(orbs), "none", k))
            seen.add(orbs)
        else:
            plus, minus = (orbs, partner) if dirs(orbs) > dirs(partner) else (partner, orbs)
            out.append(_component(model, list(plus), "+", k))
            out.append(_component(model, list(minus), "-", k))
            seen.update((orbs, partner))
        k += 1
    return out


def _finish(model, c, comps, edge, m_max):
    if len(comps) > m_max:
        raise FiniteComplexityViolated(f"{len(comps)} components exceed M_max = {m_max}")
    from .reference_tables import discrepancy_notes

    cls = LevelClassification(c, comps, model.name, None if edge is None else f"critical:{edge!r}")
    return LevelClassification(c, comps, model.name, cls.edge,
                               tuple(discrepancy_notes(model, cls)))


# ---------------------------------------------------------------------------
# actions
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ActionVector:
    I1: float
    I2: float


_GL_CACHE = {}


def _gl(n):
    if n not in _GL_CACHE:
        _GL_CACHE[n] = roots_legendre(n)
    return _GL_CACHE[n]


def _converge(integrate, what):
    prev = None
    n = 16
    while n <= QUAD_MAX_NODES:
        val = integrate(n)
        if prev is not None and abs(val - prev) <= QUAD_RTOL * max(1.0, abs(val)):
            return val
        prev = val
        n *= 2
    raise QuadratureNonconvergent(f"{what}: no convergence up to {QUAD_MAX_NODES} nodes")


def fold_integral(G, lo, hi, power=0.5, weight=None, what="integral"):
    """Integral of ``weight(x) * G(x)**power`` over ``[lo, hi]`` where ``G``
    has simple zeros at both ends and ``power`` is +1/2 or -1/2.

    With ``x = mid - h cos t`` and ``G = (x - lo)(hi - x) R(x)`` the integrand
    becomes smooth in ``t``, so the midpoint rule in ``t`` converges
    spectrally. Nodes stay ``O(h / n^2)`` away from the turning points, which
    keeps the cancellation in ``R`` near the ends harmless.
    """
    if not hi > lo:
        raise TurningPointNotBracketed(f"empty interval [{lo}, {hi}]")
    mid = 0.5 * (lo + hi)
    h = 0.5 * (hi - lo)

    def rule(n):
        t = np.pi * (np.arange(n) + 0.5) / n
        st2 = np.sin(t) ** 2
        x = mid - h * np.cos(t)
        R = np.asarray(G(x), dtype=float) / (h * h * st2)
        if np.any(R <= 0):
            raise TurningPointNotBracketed(f"{what}: integrand changes sign inside [{lo}, {hi}]")
        wt = 1.0 if weight is None else weight(x)
        if power > 0:
            vals = wt * np.sqrt(R) * h * h * st2
        else:
            vals = wt / np.sqrt(R)
        return float(np.pi / n * np.sum(vals))

    return _converge(rule, what)


def periodic_integral(f, lo, period, what="integral"):
    """Trapezoid rule over a full period (spectrally accurate for smooth f)."""
    def trap(n):
        xs = lo + period * np.arange(n) / n
        return float(period * np.mean(f(xs)))
    return _converge(trap, what)


def _dof_momentum(dof, kappa):
    def p(x):
        return np.sqrt(np.clip(dof(x) - kappa, 0.0, None))
    return p


def orbit_action(dof, kappa, orbit, scale=1.0):
    """(1/2pi) times the cycle integral of ``scale * sqrt(F - kappa)``."""
    p = _dof_momentum(dof, kappa)
    if orbit.kind == "libration":
        val = fold_integral(lambda x: dof(x) - kappa, orbit.lo, orbit.hi, 0.5,
                            what="libration action")
        return scale * val / np.pi
    if orbit.kind == "rotation":
        val = periodic_integral(p, dof.lo, dof.hi - dof.lo, "rotation action")
        return scale * orbit.direction * val / (2 * np.pi)
    if orbit.kind == "rest":
        return 0.0
    raise NotATorus(f"orbit of kind {orbit.kind} carries no action")


def action_vector(model, b: MomentValue, component: LevelComponent) -> ActionVector:
    """Normalised actions ``(I1, I2)`` of a torus component at ``b``."""
    if not component.is_torus:
        raise NotATorus(f"component of kind {component.kind} is not a torus")
    if b.b1 <= 0:
        raise ZeroCovector("b1 must be positive")
    if isinstance(model, SurfaceOfRevolution):
        if component.kind == "meridian-torus":
            return ActionVector(0.0, b.b1 * model.L / np.pi)
        (orbit, _) = component.orbits
        kappa = abs(b.c)
        a = model.profile
        _check_turning(model, orbit, kappa)
        # sqrt(1 - c^2/a^2) = sqrt(a - |c|) * sqrt(a + |c|) / a
        val = fold_integral(lambda r: a(r) - kappa, orbit.lo, orbit.hi, 0.5,
                            lambda r: np.sqrt(a(r) + kappa) / a(r), "sphere action")
        return ActionVector(b.b2, b.b1 * val / np.pi + abs(b.b2))
    if isinstance(model, TorusOfRevolution):
        (dof,) = _dofs(model)
        orbit = component.orbits[0]
        I2 = orbit_action(dof, b.c ** 2, orbit, scale=b.b1)
        return ActionVector(b.b2 / (2 * np.pi), abs(I2))
    d1, d2 = _dofs(model)
    o1, o2 = component.orbits
    c = b.c
    I1 = orbit_action(d1, c, o1, scale=b.b1)
    I2 = orbit_action(d2, -c, o2, scale=b.b1)
    return ActionVector(abs(I1), abs(I2))


def _check_turning(model, orbit, kappa):
    a = model.profile
    for x in (orbit.lo, orbit.hi):
        if abs(float(a(x)) - kappa) > 1e-9 * max(1.0, kappa):
            raise TurningPointNotBracketed(f"a({x}) != |c| at the annulus end")


def action_I2(model, b: MomentValue, component: LevelComponent) -> float:
    return action_vector(model, b, component).I2


# ---------------------------------------------------------------------------
# geodesic flow
# ---------------------------------------------------------------------------

# fourth-order Yoshida composition coefficients
_W1 = 1.0 / (2.0 - 2.0 ** (1.0 / 3.0))
_W0 = 1.0 - 2.0 * _W1
_YOSHIDA = (_W1, _W0, _W1)


@dataclass
class Trajectory:
    times: np.ndarray
    points: list
    dt: float
    drift_H: float
    drift_p2: float

    def polar(self, model):
        return [to_polar(model, z) if isinstance(model, SurfaceOfRevolution) else z
                for z in self.points]


def _sphere_step(model, z, h):
    """One Yoshida step of length h for 1/2 |xi|^2 in the current chart."""
    a = model.profile
    if z.chart == "polar":
        r, th = z.q
        pr, pth = z.p
        for w in _YOSHIDA:
            r += 0.5 * w * h * pr
            av = float(a(r))
            dav = float(a.derivative(r, 1))
            pr += w * h * pth * pth * dav / av**3
            th += w * h * pth / av**2
            r += 0.5 * w * h * pr
        return PhasePoint("polar", (r, th % (2 * np.pi)), (pr, pth))
    X, Y = z.q
    PX, PY = z.p
    south = z.chart == "south"
    for w in _YOSHIDA:
        X += 0.5 * w * h * PX
        Y += 0.5 * w * h * PY
        s = math.hypot(X, Y)
        pth = X * PY - Y * PX
        k, dk = _pole_k(model, s, south)
        om = pth * k * w * h
        kap = 0.5 * pth * pth * dk * w * h
        qx, qy = (X / s, Y / s) if s > 0 else (0.0, 0.0)
        QX, QY = PX - kap * qx, PY - kap * qy
        co, si = math.cos(om), math.sin(om)
        X, Y = co * X - si * Y, si * X + co * Y
        PX, PY = co * QX - si * QY, si * QX + co * QY
        X += 0.5 * w * h * PX
        Y += 0.5 * w * h * PY
    return PhasePoint(z.chart, (X, Y), (PX, PY))


def _flat_step(model, z, h, b1):
    """Yoshida step of K = 1/2 |p|^2 - 1/2 b1^2 g(q) in fictitious time;
    returns the new point and the elapsed physical time."""
    (x, y), (px, py) = z.q, z.p
    t = 0.0
    for w in _YOSHIDA:
        x += 0.5 * w * h * px
        y += 0.5 * w * h * py
        if isinstance(model, TorusOfRevolution):
            g = float(model.conformal(x))
            gx, gy = float(model.conformal.derivative(x, 1)), 0.0
        else:
            g = float(model.U1(x) - model.U2(y))
            gx, gy = float(model.U1.derivative(x, 1)), -float(model.U2.derivative(y, 1))
        px += w * h * 0.5 * b1 * b1 * gx
        py += w * h * 0.5 * b1 * b1 * gy
        t += w * h * g
        x += 0.5 * w * h * px
        y += 0.5 * w * h * py
    return PhasePoint("flat", (x % 1.0, y % 1.0), (px, py)), t


def integrate_geodesic(model, z0: PhasePoint, T: float, dt: float = 1e-3,
                       record_every: int = 10, tol: float = DRIFT_TOL) -> Trajectory:
    """Unit-speed geodesic flow of ``H = |xi|_g`` up to time ``T``.

    Surfaces of revolution switch to Cartesian pole charts inside
    ``r < delta`` or ``r > L - delta`` (``delta = 0.05 L``) and switch back
    beyond ``2 delta``. Torus families integrate a Poincare time-transformed
    Hamiltonian whose flow has constant speed in the flat coordinates.
    """
    if not dt > 0:
        raise ValueError("dt must be positive")
    m0 = moment_map(model, z0)
    b1 = m0.b1
    z = z0
    times = [0.0]
    pts = [z0]
    drift_H = drift_p2 = 0.0
    t = 0.0
    step = 0
    if isinstance(model, SurfaceOfRevolution):
        delta = 0.05 * model.L
        h = dt / b1  # time for 1/2|xi|^2 equivalent to dt for |xi|
        nsteps = int(round(T / dt))
        for step in range(1, nsteps + 1):
            if z.chart == "polar":
                r = z.q[0]
                if r < delta:
                    z = to_pole(model, z, "north")
                elif r > model.L - delta:
                    z = to_pole(model, z, "south")
            elif math.hypot(*z.q) > 2 * delta:
                z = to_polar(model, z)
            z = _sphere_step(model, z, h)
            t = step * dt
            if step % record_every == 0 or step == nsteps:
                m = moment_map(model, z)
                drift_H = max(drift_H, abs(m.b1 - b1))
                drift_p2 = max(drift_p2, abs(m.b2 - m0.b2))
                times.append(t)
                pts.append(z)
    else:
        if z.chart != "flat":
            raise ValueError("torus families use the 'flat' chart")
        # d t_H = b1 g ds on the zero level of K, so ds = dt / (b1 g) keeps
        # the physical step near dt
        while t < T:
            g = _conformal(model, z.q)
            z, elapsed = _flat_step(model, z, dt / (b1 * g), b1)
            t += b1 * elapsed
            step += 1
            if step % record_every == 0 or t >= T:
                m = moment_map(model, z)
                drift_H = max(drift_H, abs(m.b1 - b1))
                drift_p2 = max(drift_p2, abs(m.b2 - m0.b2))
                times.append(t)
                pts.append(z)
    scale = max(1.0, abs(b1))
    if drift_H > tol * scale or drift_p2 > tol * max(scale, abs(m0.b2)):
        raise StepUnstable(f"conserved quantities drifted by {drift_H:.2e}, {drift_p2:.2e}; "
                           f"reduce dt below {dt}")
    return Trajectory(np.array(times), pts, dt, drift_H, drift_p2)


# ---------------------------------------------------------------------------
# projected torus measures
# ---------------------------------------------------------------------------

def pushforward_density(model, component: LevelComponent, b: MomentValue, grid: Grid1D):
    """Density ``f`` with ``pi_* d mu = f dV_g`` sampled on ``grid``.

    Revolution families return values on the radial / profile coordinate
    (the density is independent of the angle). Liouville tori return the
    outer product over ``grid x grid``. Turning points and poles are
    reported as ``inf``; points outside the projection are 0.
    """
    if not component.is_torus:
        raise NotATorus(f"component of kind {component.kind} has no torus measure")
    x = grid.nodes
    if isinstance(model, SurfaceOfRevolution):
        a = model.profile
        if component.kind == "meridian-torus":
            f = 1.0 / (2 * np.pi * model.L * a(x))
            return np.where(a(x) > 0, f, np.inf)
        orbit = component.orbits[0]
        c = abs(b.c)

        def w(r):
            return 1.0 / np.sqrt(np.clip(1.0 - (c / a(r)) ** 2, 0.0, None))

        T = fold_integral(lambda r: a(r) - c, orbit.lo, orbit.hi, -0.5,
                          lambda r: a(r) / np.sqrt(a(r) + c), "sphere density mass")
        inside = (x > orbit.lo) & (x < orbit.hi)
        out = np.zeros_like(x)
        with np.errstate(divide="ignore"):
            out[inside] = w(x[inside]) / (2 * np.pi * T * a(x[inside]))
        edge = np.isclose(x, orbit.lo, atol=1e-14, rtol=0) | np.isclose(x, orbit.hi, atol=1e-14, rtol=0)
        out[edge] = np.inf
        return out
    if isinstance(model, TorusOfRevolution):
        (dof,) = _dofs(model)
        orbit = component.orbits[0]
        return _dof_density(dof, b.c ** 2, orbit, x, weight=dof.F)
    d1, d2 = _dofs(model)
    o1, o2 = component.orbits
    c = b.c
    f1 = _dof_density(d1, c, o1, x, None, normalize=False)
    f2 = _dof_density(d2, -c, o2, x, None, normalize=False)
    A1 = _dof_mass(d1, c, o1, d1.F)
    B1 = _dof_mass(d1, c, o1, None)
    A2 = _dof_mass(d2, -c, o2, d2.F)
    B2 = _dof_mass(d2, -c, o2, None)
    mass = A1 * B2 - B1 * A2
    return np.outer(f1, f2) / mass


def _dof_mass(dof, kappa, orbit, weight):
    def f(x):
        base = 1.0 / np.sqrt(np.clip(dof(x) - kappa, 0.0, None))
        return base if weight is None else base * weight(x)
    if orbit.kind == "rotation":
        return periodic_integral(f, dof.lo, dof.hi - dof.lo, "density mass")
    if orbit.kind == "rest":
        w = (lambda x: np.ones_like(x)) if weight is None else weight
        return periodic_integral(w, dof.lo, dof.hi - dof.lo, "density mass")
    return fold_integral(lambda x: dof(x) - kappa, orbit.lo, orbit.hi, -0.5, weight,
                         "density mass")


def _in_orbit(x, orbit, P):
    if orbit.kind in ("rotation", "rest"):
        return np.ones_like(x, dtype=bool)
    lo = orbit.lo
    xr = lo + (x - lo) % P
    return (xr > lo) & (xr < orbit.hi)


def _dof_density(dof, kappa, orbit, x, weight, normalize=True):
    P = dof.hi - dof.lo
    inside = _in_orbit(x, orbit, P)
    out = np.zeros_like(x)
    if orbit.kind == "rest":
        out[:] = 1.0
    else:
        with np.errstate(divide="ignore"):
            out[inside] = 1.0 / np.sqrt(np.clip(dof(x[inside]) - kappa, 0.0, None))
    if orbit.kind == "libration":
        xr = orbit.lo + (x - orbit.lo) % P
        edge = np.isclose(xr, orbit.lo, atol=1e-14, rtol=0) | np.isclose(xr, orbit.hi, atol=1e-14, rtol=0)
        out[edge] = np.inf
    if normalize:
        out = out / _dof_mass(dof, kappa, orbit, weight)
    return out


def histogram_density(model, traj: Trajectory, edges: np.ndarray):
    """Empirical projected density of a trajectory on the radial coordinate,
    per unit ``dV_g``; an oracle for ``pushforward_density``."""
    if isinstance(model, SurfaceOfRevolution):
        rs = np.array([to_polar(model, z).q[0] for z in traj.points])
    else:
        rs = np.array([z.q[0] for z in traj.points])
    counts, _ = np.histogram(rs, bins=edges)
    frac = counts / counts.sum()
    if isinstance(model, SurfaceOfRevolution):
        from scipy.integrate import quad
        vol = np.array([2 * np.pi * quad(lambda r: float(model.profile(r)), lo, hi)[0]
                        for lo, hi in zip(edges[:-1], edges[1:])])
    else:
        from scipy.integrate import quad
        vol = np.array([quad(lambda x: float(model.conformal(x)), lo, hi)[0]
                        for lo, hi in zip(edges[:-1], edges[1:])])
    return frac / vol

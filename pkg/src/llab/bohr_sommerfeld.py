"""Bohr-Sommerfeld spectra from action variables.

A torus family is a connected range of levels ``c`` over which the torus
components keep the same combinatorial type (same set of enclosed maxima
per coordinate, or rotation). On a family the quantisation conditions read

    Q1(lam, c) = |m| + nu1/4,   Q2(lam, c) = n + nu2/4

with ``Q = lam * Q(1, c)`` by homogeneity, so the ratio ``Q1/Q2`` fixes ``c``
and then either condition fixes the frequency ``lam``. The subprincipal
term vanishes for Laplacians and is dropped.

For surfaces of revolution ``Q1 = p_theta`` and ``Q2 = I2 - |p_theta|``, the
radial action, so ``n`` counts radial nodes (``l = n + |m|`` on the round
sphere). On tori ``Q1 = I1``, ``Q2 = I2``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import brentq

from .classical import (
    MomentValue,
    _dofs,
    action_vector,
    classify_level,
    critical_levels,
)
from .errors import (
    AmbiguousCalibration,
    InvalidParameter,
    MatchingFailed,
    NoRootInFamily,
    NumericalToleranceError,
    QuadratureNonconvergent,
)
from .fitting import fit_exponent
from .surfaces import LiouvilleTorus, SurfaceOfRevolution, TorusOfRevolution

EPS_RES = 1e-9
ROOT_TOL = 1e-10
TIE_TOL = 1e-3


# ---------------------------------------------------------------------------
# families
# ---------------------------------------------------------------------------

def _orbit_key(dof, orbit, maxima):
    if orbit.kind in ("rotation", "rest"):
        return "rot"
    if orbit.kind == "meridian":
        return "mer"
    P = dof.hi - dof.lo
    inside = []
    for i, x in enumerate(maxima):
        xr = orbit.lo + (x - orbit.lo) % P if dof.periodic else x
        if orbit.lo < xr < orbit.hi:
            inside.append(i)
    return "lib" + "+".join(str(i) for i in inside)


def _component_key(model, comp):
    dofs = _dofs(model)
    keys = []
    for dof, orbit in zip(dofs, comp.orbits):
        _, pts = dof.critical()
        maxima = [x for x, _, kind in pts if kind == "max"]
        keys.append(_orbit_key(dof, orbit, maxima))
    return ":".join(keys)


@dataclass(frozen=True)
class TorusFamily:
    """Tori of one combinatorial type over the level range ``(c_lo, c_hi)``.

    ``closed`` records whether the family extends to each end level
    (for example the meridian torus at ``c = 0`` on a sphere).
    """

    model: object = field(repr=False, compare=False)
    key: str
    c_lo: float
    c_hi: float
    closed: tuple = (False, False)
    _memo: dict = field(default_factory=dict, repr=False, compare=False)

    @property
    def id(self):
        return self.key

    def component(self, c):
        cls = classify_level(self.model, c, strict=False)
        if isinstance(self.model, SurfaceOfRevolution) and c == 0:
            return cls.components[0]
        for comp in cls.components:
            if comp.is_torus and comp.orientation in ("+", "none") \
                    and _component_key(self.model, comp) == self.key:
                return comp
        raise NoRootInFamily(f"family {self.key} has no torus at c = {c!r}")

    def contains(self, c):
        if self.c_lo < c < self.c_hi:
            return True
        return (c == self.c_lo and self.closed[0]) or (c == self.c_hi and self.closed[1])

    def quantized(self, c):
        """``(Q1, Q2)`` at ``b1 = 1``."""
        if c in self._memo:
            return self._memo[c]
        self._memo[c] = self._quantized(c)
        return self._memo[c]

    def _quantized(self, c):
        comp = self.component(c)
        av = action_vector(self.model, MomentValue(1.0, c), comp)
        if isinstance(self.model, SurfaceOfRevolution):
            return abs(c), av.I2 - abs(c)
        return abs(av.I1), abs(av.I2)

    def default_maslov(self):
        """Two per librating coordinate, zero per rotating one."""
        parts = self.key.split(":")
        if isinstance(self.model, LiouvilleTorus):
            nu = [2 if p.startswith("lib") else 0 for p in parts]
            return MaslovData(nu[0], nu[1])
        return MaslovData(0, 2 if parts[0].startswith("lib") else 0)


def torus_families(model):
    """All torus families of ``model``, ordered by ``c_lo`` then key."""
    levels = critical_levels(model)
    if isinstance(model, LiouvilleTorus):
        edges = sorted(set(levels))
    else:
        edges = sorted(set([0.0] + levels))
    pieces = []
    for lo, hi in zip(edges, edges[1:]):
        mid = 0.5 * (lo + hi)
        cls = classify_level(model, mid)
        keys = sorted({_component_key(model, comp) for comp in cls.components if comp.is_torus})
        for k in keys:
            pieces.append([k, lo, hi])
    # merge adjacent pieces of one key
    merged = []
    for k, lo, hi in sorted(pieces, key=lambda p: (p[0], p[1])):
        if merged and merged[-1][0] == k and merged[-1][2] == lo:
            merged[-1][2] = hi
        else:
            merged.append([k, lo, hi])
    fams = []
    for k, lo, hi in merged:
        closed = (_has_torus_at(model, k, lo), _has_torus_at(model, k, hi))
        fams.append(TorusFamily(model, k, lo, hi, closed))
    fams.sort(key=lambda f: (f.c_lo, f.key))
    return fams


def _has_torus_at(model, key, c):
    if isinstance(model, SurfaceOfRevolution) and c == 0:
        return True
    try:
        cls = classify_level(model, c)
    except NumericalToleranceError:
        return False
    for comp in cls.components:
        if comp.is_torus and _component_key(model, comp) == key:
            return True
    return False


def family_at(model, c, key=None):
    """The family containing level ``c`` (choose by ``key`` when several)."""
    fams = [f for f in torus_families(model) if f.contains(c)]
    if key is not None:
        fams = [f for f in fams if f.key == key]
    if not fams:
        raise NoRootInFamily(f"no torus family contains c = {c!r}")
    return fams[0]


def principal_family(model):
    """The family that every sector's low modes belong to: the one reaching
    ``c = 0`` on a sphere, the libration family around the highest maximum
    on a torus of revolution, and the only family on a flat profile."""
    fams = torus_families(model)
    if isinstance(model, SurfaceOfRevolution):
        return next(f for f in fams if f.c_lo == 0.0)
    if isinstance(model, TorusOfRevolution):
        libs = [f for f in fams if f.key.startswith("lib")]
        return max(libs, key=lambda f: f.c_hi) if libs else fams[0]
    return fams[0]


# ---------------------------------------------------------------------------
# quantisation
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class MaslovData:
    nu1: int
    nu2: int

    def __post_init__(self):
        if self.nu1 not in range(4) or self.nu2 not in range(4):
            raise InvalidParameter("Maslov indices live in {0, 1, 2, 3}")


@dataclass(frozen=True)
class BSState:
    m: int
    n: int
    lam: float  # frequency; the Laplace eigenvalue is lam**2
    family: str
    c: float
    residual: float

    @property
    def eigenvalue(self):
        return self.lam * self.lam


def _scan_points(f: TorusFamily):
    lo, hi = f.c_lo, f.c_hi
    w = hi - lo
    pts = [lo + w * k / 64 for k in range(1, 64)]
    pts += [lo + w * 2.0 ** -j for j in range(7, 40)]
    pts += [hi - w * 2.0 ** -j for j in range(7, 40)]
    if f.closed[0]:
        pts.append(lo)
    if f.closed[1]:
        pts.append(hi)
    return sorted(set(pts))


def _solve_state(fam: TorusFamily, t1, t2):
    def phi(c):
        q1, q2 = fam.quantized(c)
        return t2 * q1 - t1 * q2

    if t1 == 0 and fam.closed[0] and fam.c_lo == 0.0 and not isinstance(fam.model, LiouvilleTorus):
        return 0.0
    prev = None
    for c in _scan_points(fam):
        try:
            val = phi(c)
        except (QuadratureNonconvergent, NoRootInFamily):
            prev = None
            continue
        if val == 0:
            return c
        if prev is not None and (prev[1] < 0) != (val < 0):
            return brentq(phi, prev[0], c, xtol=1e-15, rtol=4 * np.finfo(float).eps,
                          maxiter=200)
        prev = (c, val)
    raise NoRootInFamily(f"no level in family {fam.key} satisfies the ratio {t1}:{t2}")


def bs_state(model, family: TorusFamily, maslov: MaslovData, m: int, n: int) -> BSState:
    t1 = abs(m) + maslov.nu1 / 4
    t2 = n + maslov.nu2 / 4
    if t1 == 0 and t2 == 0:
        raise NoRootInFamily("(0, 0) with zero Maslov shift is the constant mode")
    if n < 0:
        raise NoRootInFamily("n counts nodes and must be nonnegative")
    c = _solve_state(family, t1, t2)
    q1, q2 = family.quantized(c)
    lam = t1 / q1 if q1 > abs(q2) else t2 / q2
    res = max(abs(lam * q1 - t1), abs(lam * q2 - t2))
    if res > ROOT_TOL * max(1.0, t1, t2):
        raise NoRootInFamily(f"root residual {res:.2e} for (m, n) = ({m}, {n})")
    return BSState(m, n, float(lam), family.key, float(c), float(res))


def bs_spectrum(model, family: TorusFamily, maslov: MaslovData, m_range, n_range,
                skip_missing=True):
    """BS frequencies for every ``(m, n)`` in the ranges, ascending.

    States whose torus leaves the family are skipped (or raise
    ``NoRootInFamily`` with ``skip_missing=False``).
    """
    out = []
    for m in m_range:
        for n in n_range:
            try:
                out.append(bs_state(model, family, maslov, m, n))
            except NoRootInFamily:
                if not skip_missing:
                    raise
    out.sort(key=lambda s: (s.lam, s.m, s.n))
    return out


def calibrate_maslov(model, family: TorusFamily, exact_low_modes) -> MaslovData:
    """Pick ``nu2`` in 0..3 minimising the mean BS error against exact modes.

    ``exact_low_modes`` holds ``(m, n, lam_exact)`` triples in the frequency
    convention. ``nu1`` keeps its default (zero for angular actions).
    """
    modes = list(exact_low_modes)
    if len(modes) < 5:
        raise InvalidParameter("calibration needs at least 5 exact modes")
    nu1 = family.default_maslov().nu1
    scores = []
    for nu2 in range(4):
        md = MaslovData(nu1, nu2)
        errs = []
        for m, n, lam in modes:
            try:
                errs.append(abs(bs_state(model, family, md, m, n).lam - lam))
            except NoRootInFamily:
                errs.append(math.inf)
        scores.append((float(np.mean(errs)), nu2))
    scores.sort()
    if math.isinf(scores[0][0]):
        raise AmbiguousCalibration("no Maslov choice quantises every calibration mode")
    if scores[1][0] - scores[0][0] < TIE_TOL:
        raise AmbiguousCalibration(f"nu2 = {scores[0][1]} and {scores[1][1]} tie "
                                   f"({scores[0][0]:.3g} vs {scores[1][0]:.3g})")
    return MaslovData(nu1, scores[0][1])


# ---------------------------------------------------------------------------
# comparison with exact spectra
# ---------------------------------------------------------------------------

@dataclass
class ConvergenceReport:
    rows: list  # (m, n, lam_bs, lam_exact, error)
    exponent: float | None
    stderr: float | None
    max_error: float
    exact: bool

    def passes(self, bound=-0.8):
        return self.exact or (self.exponent is not None and self.exponent <= bound)


def match_states(states, exact, ratio=0.5):
    """Pair each BS state with the nearest exact frequency in its sector.

    ``exact`` maps ``m`` to a sequence of exact frequencies. A pairing is
    ambiguous when the runner-up is within ``1/ratio`` times the distance of
    the winner, or two states claim one mode.
    """
    pairs = []
    used = set()
    for s in states:
        cands = np.asarray(sorted(exact.get(s.m, ())), dtype=float)
        if len(cands) == 0:
            raise MatchingFailed(f"no exact modes in sector m = {s.m}")
        d = np.abs(cands - s.lam)
        order = np.argsort(d)
        best = int(order[0])
        if len(cands) > 1 and d[best] > ratio * d[order[1]]:
            raise MatchingFailed(f"state (m, n) = ({s.m}, {s.n}) sits between two exact modes")
        if (s.m, best) in used:
            raise MatchingFailed(f"two states claim exact mode {best} of sector {s.m}")
        used.add((s.m, best))
        pairs.append((s, float(cands[best])))
    return pairs


def bs_vs_exact(model, family, states, exact) -> ConvergenceReport:
    """Per-mode BS error and its decay exponent against frequency."""
    pairs = match_states(states, exact)
    rows = [(s.m, s.n, s.lam, e, abs(s.lam - e)) for s, e in pairs]
    errs = np.array([r[4] for r in rows])
    lams = np.array([r[3] for r in rows])
    max_err = float(errs.max()) if len(errs) else 0.0
    if max_err <= 1e-10:
        return ConvergenceReport(rows, None, None, max_err, True)
    exponent, stderr = fit_exponent(lams, errs)
    return ConvergenceReport(rows, exponent, stderr, max_err, False)


def lattice_gap(states):
    """``eps_b = min (lam_{i+1} - lam_i) * lam_{i+1}`` over distinct
    consecutive frequencies, so gaps are at least ``eps_b / lam``."""
    lams = sorted(s.lam for s in states)
    best = math.inf
    for a, b in zip(lams, lams[1:]):
        if b - a > 1e-9 * b:
            best = min(best, (b - a) * b)
    return best


# ---------------------------------------------------------------------------
# resonance
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class PairVerdict:
    i: int
    j: int
    verdict: str
    gap: float
    reason: str


@dataclass(frozen=True)
class ResonanceReport:
    c: float
    pairs: tuple
    verdict: str
    gap: float

    def to_dict(self):
        return {"c": self.c, "verdict": self.verdict, "gap": self.gap,
                "pairs": [{"i": p.i, "j": p.j, "verdict": p.verdict, "gap": p.gap,
                           "reason": p.reason} for p in self.pairs]}


def detect_resonance(model, c, eps_res=EPS_RES) -> ResonanceReport:
    """Compare quantisation data of every pair of tori on the level.

    Involution partners are resonant by symmetry; other pairs are resonant
    when their absolute actions agree within ``eps_res`` and their default
    Maslov data coincide.
    """
    cls = classify_level(model, c)
    tori = cls.tori()
    b = MomentValue(1.0, cls.c)
    data = {}
    for i in tori:
        comp = cls.components[i]
        av = action_vector(model, b, comp)
        key = _component_key(model, comp)
        fam = TorusFamily(model, key, cls.c, cls.c)
        data[i] = (abs(av.I1), abs(av.I2), fam.default_maslov(), comp)
    pairs = []
    for a_i, i in enumerate(tori):
        for j in tori[a_i + 1:]:
            I1a, I2a, nua, ca = data[i]
            I1b, I2b, nub, cb = data[j]
            gap = max(abs(I1a - I1b), abs(I2a - I2b))
            if ca.index == cb.index and {ca.orientation, cb.orientation} == {"+", "-"}:
                pairs.append(PairVerdict(i, j, "resonant", gap, "involution"))
            elif gap <= eps_res and nua == nub:
                pairs.append(PairVerdict(i, j, "resonant", gap, "equal actions"))
            else:
                pairs.append(PairVerdict(i, j, "non-resonant", gap, "action gap"))
    cross = [p for p in pairs if p.reason != "involution"]
    verdict = "non-resonant" if any(p.verdict == "non-resonant" for p in pairs) else "resonant"
    gap = max((p.gap for p in cross), default=0.0)
    return ResonanceReport(cls.c, tuple(pairs), verdict, gap)

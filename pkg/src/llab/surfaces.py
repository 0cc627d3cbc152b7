"""Integrable surface families and their built-in instances.

Three families are supported:

* ``SurfaceOfRevolution``: a sphere with metric ``dr^2 + a(r)^2 dtheta^2``
  on ``[0, L] x [0, 2 pi)``.
* ``TorusOfRevolution``: the conformal torus ``a(x) (dx^2 + dxi^2)`` on the
  unit square with periodic ``a``.
* ``LiouvilleTorus``: ``(U1(x1) - U2(x2)) (dx1^2 + dx2^2)`` on the unit square.

Profiles are ``SmoothFunctionSpec`` values which evaluate themselves and
their derivatives in closed form, so downstream quadrature never sees
finite-difference noise.
"""

from __future__ import annotations

import functools
import math
from dataclasses import dataclass, field
from typing import Union

import numpy as np
from scipy.optimize import brentq

from .errors import (
    DegenerateCritical,
    InvalidParameter,
    UnknownBuiltin,
)

EPS_VAL = 1e-8
EPS_MORSE = 1e-6
EPS_GAP = 1e-9
SCAN_POINTS = 4096


# ---------------------------------------------------------------------------
# smooth functions
# ---------------------------------------------------------------------------

def _sin(x, order, params):
    return np.sin(x + order * np.pi / 2)


def _bourgain(x, order, params):
    (tau,) = params
    # 1 - tau sin^2(pi x) = 1 - tau/2 + (tau/2) cos(2 pi x)
    w = 2 * np.pi
    osc = 0.5 * tau * w**order * np.cos(w * x + order * np.pi / 2)
    if order == 0:
        return 1.0 - 0.5 * tau + osc
    return osc


def _constant(x, order, params):
    (value,) = params
    x = np.asarray(x, dtype=float)
    return np.full_like(x, value if order == 0 else 0.0)


_NAMED = {
    # name: (evaluator, number of params, natural period)
    "sin": (_sin, 0, 2 * np.pi),
    "bourgain": (_bourgain, 1, 1.0),
    "constant": (_constant, 1, 1.0),
}


@dataclass(frozen=True)
class SmoothFunctionSpec:
    """A profile function with closed-form derivatives of every order.

    Trig polynomials are ``sum_k c_k cos(2 pi k x / P) + s_k sin(2 pi k x / P)``
    with ``coefficients = ((k, c_k, s_k), ...)`` and period ``P``.
    """

    kind: str
    name: str | None = None
    params: tuple = ()
    coefficients: tuple = ()
    period: float = 1.0

    def __post_init__(self):
        if self.kind == "named-analytic":
            if self.name not in _NAMED:
                raise InvalidParameter(f"unknown analytic function {self.name!r}")
            nparams = _NAMED[self.name][1]
            if len(self.params) != nparams:
                raise InvalidParameter(
                    f"{self.name} takes {nparams} parameters, got {len(self.params)}")
            if not all(math.isfinite(p) for p in self.params):
                raise InvalidParameter("parameters must be finite")
        elif self.kind == "trig-polynomial":
            if len(self.coefficients) == 0:
                raise InvalidParameter("trig polynomial needs at least one term")
            for term in self.coefficients:
                if len(term) != 3:
                    raise InvalidParameter("trig terms are (k, cos, sin) triples")
                k, c, s = term
                if int(k) != k or k < 0:
                    raise InvalidParameter("harmonic index must be a nonnegative integer")
                if not (math.isfinite(c) and math.isfinite(s)):
                    raise InvalidParameter("trig coefficients must be finite")
            if not (self.period > 0 and math.isfinite(self.period)):
                raise InvalidParameter("period must be positive")
        else:
            raise InvalidParameter(f"unknown function kind {self.kind!r}")

    @classmethod
    def named(cls, name, *params, period=None):
        if name not in _NAMED:
            raise InvalidParameter(f"unknown analytic function {name!r}")
        return cls("named-analytic", name=name, params=tuple(float(p) for p in params),
                   period=_NAMED[name][2] if period is None else period)

    @classmethod
    def trig(cls, coefficients, period=1.0):
        terms = tuple((int(k), float(c), float(s)) for k, c, s in coefficients)
        return cls("trig-polynomial", coefficients=terms, period=float(period))

    def __call__(self, x):
        return self.derivative(x, 0)

    def derivative(self, x, order=1):
        x = np.asarray(x, dtype=float)
        if self.kind == "named-analytic":
            return _NAMED[self.name][0](x, order, self.params)
        w = 2 * np.pi / self.period
        out = np.zeros_like(x)
        for k, c, s in self.coefficients:
            if k == 0:
                if order == 0:
                    out = out + c
                continue
            scale = (w * k) ** order
            phase = w * k * x + order * np.pi / 2
            out = out + scale * (c * np.cos(phase) + s * np.sin(phase))
        return out

    @property
    def is_constant(self):
        if self.kind == "named-analytic":
            return self.name == "constant"
        return all(k == 0 or (c == 0 and s == 0) for k, c, s in self.coefficients)

    def to_dict(self):
        if self.kind == "named-analytic":
            return {"kind": self.kind, "name": self.name, "params": list(self.params),
                    "period": self.period}
        return {"kind": self.kind, "coefficients": [list(t) for t in self.coefficients],
                "period": self.period}

    @classmethod
    def from_dict(cls, d):
        try:
            if d["kind"] == "named-analytic":
                return cls("named-analytic", name=d["name"],
                           params=tuple(float(p) for p in d.get("params", ())),
                           period=float(d.get("period", _NAMED.get(d["name"], (0, 0, 1.0))[2])))
            return cls.trig(d["coefficients"], d.get("period", 1.0))
        except (KeyError, TypeError) as exc:
            raise InvalidParameter(f"malformed function spec: {exc}") from exc


# ---------------------------------------------------------------------------
# critical structure
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class CriticalPoint:
    location: float
    value: float
    kind: str  # "max" | "min"
    curvature: float


@dataclass(frozen=True)
class CriticalStructure:
    points: tuple
    global_max: float
    global_min: float
    constant: bool = False

    @property
    def maxima(self):
        return tuple(p for p in self.points if p.kind == "max")

    @property
    def minima(self):
        return tuple(p for p in self.points if p.kind == "min")


def critical_structure(f, domain=None, periodic=None, n_scan=SCAN_POINTS):
    if periodic is None:
        periodic = domain is None
    if domain is None:
        domain = (0.0, f.period)
    return _critical_structure(f, (float(domain[0]), float(domain[1])), bool(periodic), n_scan)


@functools.lru_cache(maxsize=256)
def _critical_structure(f, domain, periodic, n_scan):
    """Interior critical points of ``f`` on ``domain``.

    Roots of ``f'`` are bracketed by sign changes on a uniform scan grid and
    polished with Brent's method. For periodic functions the scan wraps
    around and ``domain`` is one period starting at 0.
    """
    lo, hi = map(float, domain)
    if periodic:
        xs = lo + (hi - lo) * np.arange(n_scan) / n_scan
    else:
        xs = np.linspace(lo, hi, n_scan + 1)[1:-1]
    vals = f(xs)
    if f.is_constant:
        v = float(vals[0])
        return CriticalStructure((), v, v, constant=True)

    d1 = f.derivative(xs, 1)
    scale = max(float(np.max(np.abs(d1))), 1e-300)
    roots = []
    npts = len(xs)
    n_int = npts if periodic else npts - 1
    for i in range(n_int):
        j = (i + 1) % npts
        x0 = xs[i]
        x1 = xs[j] if j > i else xs[j] + (hi - lo)
        d0, dd = d1[i], d1[j]
        if d0 == 0.0:
            roots.append(x0)
        elif d0 * dd < 0:
            fp = lambda x: float(f.derivative(x, 1))
            roots.append(brentq(fp, x0, x1, xtol=1e-15, rtol=4 * np.finfo(float).eps,
                                maxiter=200))
    pts = []
    for x in roots:
        if periodic:
            x = lo + (x - lo) % (hi - lo)
            if math.isclose(x, hi, abs_tol=1e-13):
                x = lo
        curv = float(f.derivative(x, 2))
        if abs(curv) < EPS_MORSE:
            raise DegenerateCritical(
                f"critical point at {x:.12g} has |f''| = {abs(curv):.3g} < {EPS_MORSE}")
        pts.append(CriticalPoint(float(x), float(f(x)), "max" if curv < 0 else "min", curv))
    pts.sort(key=lambda p: p.location)
    dedup = []
    for p in pts:
        if dedup and abs(p.location - dedup[-1].location) < 1e-11:
            continue
        dedup.append(p)
    if periodic and len(dedup) > 1 and abs(dedup[0].location + (hi - lo) - dedup[-1].location) < 1e-11:
        dedup.pop()
    for a, b in zip(dedup, dedup[1:]):
        if a.kind == b.kind:
            raise DegenerateCritical(
                f"consecutive {a.kind} at {a.location:.6g}, {b.location:.6g}; "
                f"scan grid too coarse (|f'| scale {scale:.3g})")
    values = [float(v) for v in vals] + [p.value for p in dedup]
    return CriticalStructure(tuple(dedup), max(values), min(values))


# ---------------------------------------------------------------------------
# surface families
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class SurfaceOfRevolution:
    L: float
    profile: SmoothFunctionSpec
    name: str = "custom"
    params: tuple = ()
    family = "surface-of-revolution"
    angular_period = 2 * np.pi

    @property
    def area(self):
        from scipy.integrate import quad
        val, _ = quad(lambda r: float(self.profile(r)), 0.0, self.L, limit=200,
                      epsabs=1e-13, epsrel=1e-13)
        return 2 * np.pi * val

    def critical(self):
        return critical_structure(self.profile, (0.0, self.L), periodic=False)

    def to_dict(self):
        return {"family": self.family, "name": self.name, "params": list(self.params),
                "L": self.L, "profile": self.profile.to_dict()}


@dataclass(frozen=True)
class TorusOfRevolution:
    conformal: SmoothFunctionSpec
    name: str = "custom"
    params: tuple = ()
    family = "torus-of-revolution"
    angular_period = 1.0
    L = 1.0

    @property
    def area(self):
        xs = np.arange(SCAN_POINTS) / SCAN_POINTS
        return float(np.mean(self.conformal(xs)))

    def critical(self):
        return critical_structure(self.conformal, (0.0, 1.0), periodic=True)

    def to_dict(self):
        return {"family": self.family, "name": self.name, "params": list(self.params),
                "conformal": self.conformal.to_dict()}


@dataclass(frozen=True)
class LiouvilleTorus:
    U1: SmoothFunctionSpec
    U2: SmoothFunctionSpec
    name: str = "custom"
    params: tuple = ()
    family = "liouville"

    @property
    def area(self):
        xs = np.arange(SCAN_POINTS) / SCAN_POINTS
        return float(np.mean(self.U1(xs)) - np.mean(self.U2(xs)))

    def critical(self):
        return (critical_structure(self.U1, (0.0, 1.0), periodic=True),
                critical_structure(self.U2, (0.0, 1.0), periodic=True))

    def to_dict(self):
        return {"family": self.family, "name": self.name, "params": list(self.params),
                "U1": self.U1.to_dict(), "U2": self.U2.to_dict()}


SurfaceModel = Union[SurfaceOfRevolution, TorusOfRevolution, LiouvilleTorus]


# ---------------------------------------------------------------------------
# validation
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Check:
    name: str
    passed: bool
    residual: float
    detail: str = ""


@dataclass(frozen=True)
class ValidationReport:
    model_name: str
    checks: tuple = field(default_factory=tuple)

    @property
    def usable(self):
        return all(c.passed for c in self.checks)

    def failed(self):
        return [c.name for c in self.checks if not c.passed]

    def to_dict(self):
        return {"model": self.model_name, "usable": self.usable,
                "checks": [{"name": c.name, "passed": c.passed, "residual": c.residual,
                            "detail": c.detail} for c in self.checks]}


def _morse_check(f, domain, periodic):
    try:
        cs = critical_structure(f, domain, periodic=periodic)
    except DegenerateCritical as exc:
        return Check("Morse", False, 0.0, str(exc)), None
    if cs.constant:
        return Check("Morse", True, 0.0, "constant profile, no critical points"), cs
    worst = min(abs(p.curvature) for p in cs.points) if cs.points else math.inf
    return Check("Morse", True, worst, f"{len(cs.points)} critical points"), cs


def validate(model) -> ValidationReport:
    """Check the smoothness, endpoint and positivity hypotheses of a model.

    Failures are report entries, never exceptions.
    """
    checks = []
    if isinstance(model, SurfaceOfRevolution):
        a, L = model.profile, model.L
        checks.append(Check("PositiveLength", L > 0, L))
        r = np.linspace(0, L, SCAN_POINTS + 1)[1:-1]
        amin = float(np.min(a(r)))
        checks.append(Check("Positivity", amin > 0, amin))
        end = max(abs(float(a(0.0))), abs(float(a(L))))
        checks.append(Check("EndpointZero", end <= EPS_VAL, end))
        slope = max(abs(float(a.derivative(0.0, 1)) - 1.0),
                    abs(float(a.derivative(L, 1)) + 1.0))
        checks.append(Check("EndpointSlope", slope <= EPS_VAL, slope))
        # even derivatives at the poles, orders 2 and 4 only
        even = max(abs(float(a.derivative(x, k))) for x in (0.0, L) for k in (2, 4))
        checks.append(Check("EvenDerivatives", even <= EPS_VAL * max(1.0, 1.0 / L**4), even,
                            "orders 2 and 4 checked"))
        checks.append(_morse_check(a, (0.0, L), False)[0])
    elif isinstance(model, TorusOfRevolution):
        xs = np.arange(SCAN_POINTS) / SCAN_POINTS
        amin = float(np.min(model.conformal(xs)))
        morse, cs = _morse_check(model.conformal, (0.0, 1.0), True)
        if cs is not None:
            amin = min(amin, cs.global_min)
        checks.append(Check("Positivity", amin > 0, amin))
        checks.append(morse)
    elif isinstance(model, LiouvilleTorus):
        m1, cs1 = _morse_check(model.U1, (0.0, 1.0), True)
        m2, cs2 = _morse_check(model.U2, (0.0, 1.0), True)
        xs = np.arange(SCAN_POINTS) / SCAN_POINTS
        u1min = float(np.min(model.U1(xs)))
        u2max = float(np.max(model.U2(xs)))
        if cs1 is not None:
            u1min = min(u1min, cs1.global_min)
        if cs2 is not None:
            u2max = max(u2max, cs2.global_max)
        gap = u1min - u2max
        checks.append(Check("PositivityGap", gap >= EPS_GAP, gap))
        checks.append(Check("Morse", m1.passed and m2.passed, min(m1.residual, m2.residual),
                            f"U1: {m1.detail}; U2: {m2.detail}"))
    else:
        raise TypeError(f"not a surface model: {model!r}")
    return ValidationReport(model.name, tuple(checks))


# ---------------------------------------------------------------------------
# built-in instances
# ---------------------------------------------------------------------------

BUILTINS = ("round-sphere", "bourgain", "two-bump-sphere", "flat-torus",
            "flat-liouville", "generic-liouville")

# U1 and U2 of the generic Liouville torus: one max and one min each,
# with c1+ > c1- > c2+ > c2-
GENERIC_LIOUVILLE_U1 = ((0, 3.0, 0.0), (1, 0.5, 0.0), (2, 0.0, 0.1))
GENERIC_LIOUVILLE_U2 = ((1, 0.4, 0.3), (2, 0.05, 0.0))


def two_bump_profile(beta=0.2, gamma=0.05):
    """``sin r - 4 sin^3 r (beta - gamma cos r)`` written as a sine series.

    Every term is odd about both poles, so all even derivatives vanish there;
    the coefficients satisfy ``sum k b_k = 1`` (odd k) and ``0`` (even k), which
    gives the endpoint slopes +1 and -1.
    """
    return SmoothFunctionSpec.trig(
        [(1, 0.0, 1.0 - 3.0 * beta), (2, 0.0, gamma), (3, 0.0, beta), (4, 0.0, -gamma / 2)],
        period=2 * np.pi)


def make_builtin(name, params=None):
    """Construct and validate a named built-in surface."""
    params = tuple(float(p) for p in (params or ()))
    if name == "round-sphere":
        if params:
            raise InvalidParameter("round-sphere takes no parameters")
        model = SurfaceOfRevolution(np.pi, SmoothFunctionSpec.named("sin"), name, ())
    elif name == "bourgain":
        (tau,) = params or (0.1,)
        if not 0.0 < tau < 1.0:
            raise InvalidParameter(f"bourgain needs 0 < tau < 1, got {tau}")
        model = TorusOfRevolution(SmoothFunctionSpec.named("bourgain", tau), name, (tau,))
    elif name == "two-bump-sphere":
        beta, gamma = params or (0.2, 0.05)
        model = SurfaceOfRevolution(np.pi, two_bump_profile(beta, gamma), name, (beta, gamma))
    elif name == "flat-torus":
        if params:
            raise InvalidParameter("flat-torus takes no parameters")
        model = TorusOfRevolution(SmoothFunctionSpec.named("constant", 1.0), name, ())
    elif name == "flat-liouville":
        c1, c2 = params or (2.0, 1.0)
        if not c1 > c2:
            raise InvalidParameter("flat-liouville needs U1 > U2")
        model = LiouvilleTorus(SmoothFunctionSpec.named("constant", c1),
                               SmoothFunctionSpec.named("constant", c2), name, (c1, c2))
    elif name == "generic-liouville":
        if params:
            raise InvalidParameter("generic-liouville takes no parameters")
        model = LiouvilleTorus(SmoothFunctionSpec.trig(GENERIC_LIOUVILLE_U1),
                               SmoothFunctionSpec.trig(GENERIC_LIOUVILLE_U2), name, ())
    else:
        raise UnknownBuiltin(f"unknown builtin {name!r}; choose from {', '.join(BUILTINS)}")
    report = validate(model)
    if not report.usable:
        raise InvalidParameter(f"{name}{list(params)} fails {', '.join(report.failed())}")
    return model


def model_from_dict(doc):
    """Build a model from a surface-spec document (see ``docs/surface_spec.md``)."""
    if not isinstance(doc, dict) or "family" not in doc:
        raise InvalidParameter("surface spec needs a 'family' key")
    family = doc["family"]
    if family == "builtin":
        return make_builtin(doc.get("name"), doc.get("params"))
    name = doc.get("name", "custom")
    if name in BUILTINS and "profile" not in doc and "conformal" not in doc and "U1" not in doc:
        return make_builtin(name, doc.get("params"))
    coeffs = doc.get("coefficients")
    if family == "surface-of-revolution":
        L = float(doc.get("L", np.pi))
        prof = (SmoothFunctionSpec.from_dict(doc["profile"]) if "profile" in doc
                else SmoothFunctionSpec.trig(coeffs, doc.get("period", 2 * L)))
        return SurfaceOfRevolution(L, prof, name, tuple(doc.get("params", ())))
    if family == "torus-of-revolution":
        conf = (SmoothFunctionSpec.from_dict(doc["conformal"]) if "conformal" in doc
                else SmoothFunctionSpec.trig(coeffs, 1.0))
        return TorusOfRevolution(conf, name, tuple(doc.get("params", ())))
    if family == "liouville":
        if "U1" in doc:
            u1 = doc["U1"]
            u2 = doc["U2"]
        else:
            u1, u2 = coeffs["U1"], coeffs["U2"]
        u1 = SmoothFunctionSpec.from_dict(u1) if isinstance(u1, dict) else SmoothFunctionSpec.trig(u1)
        u2 = SmoothFunctionSpec.from_dict(u2) if isinstance(u2, dict) else SmoothFunctionSpec.trig(u2)
        return LiouvilleTorus(u1, u2, name, tuple(doc.get("params", ())))
    raise InvalidParameter(f"unknown family {family!r}")

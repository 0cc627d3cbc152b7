"""Exact Fourier-Taylor series in action-angle variables and the formal
Birkhoff normal form iteration for commuting families ``q_j = I_j + ...``.

A term is ``c * eps^o * I^alpha * e^{i k.theta}`` with a Gaussian-rational
coefficient ``c``. Conjugation by a generator ``v`` is the time-one map of
its Hamiltonian flow, ``f -> exp(-ad_v) f`` with
``{f, g} = sum_j (d_theta_j f d_I_j g - d_I_j f d_theta_j g)``, so that
``exp(-ad_v)(I_j + r_j) = I_j + r_j - d_theta_j v + ...``.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from fractions import Fraction
from math import factorial

from .errors import (
    CutoffOverflow,
    EmptySeries,
    InconsistentSystem,
    InvalidParameter,
    NonzeroAverage,
    ObstructionAtOrder,
)

MAX_TERMS = 200_000


class QQi:
    """Gaussian rational ``re + i im`` with exact arithmetic."""

    __slots__ = ("re", "im")

    def __init__(self, re=0, im=0):
        self.re = Fraction(re)
        self.im = Fraction(im)

    def __add__(self, o):
        o = _qq(o)
        return QQi(self.re + o.re, self.im + o.im)

    __radd__ = __add__

    def __sub__(self, o):
        o = _qq(o)
        return QQi(self.re - o.re, self.im - o.im)

    def __neg__(self):
        return QQi(-self.re, -self.im)

    def __mul__(self, o):
        o = _qq(o)
        return QQi(self.re * o.re - self.im * o.im, self.re * o.im + self.im * o.re)

    __rmul__ = __mul__

    def __truediv__(self, o):
        o = _qq(o)
        d = o.re * o.re + o.im * o.im
        if d == 0:
            raise ZeroDivisionError("division by zero")
        return QQi((self.re * o.re + self.im * o.im) / d, (self.im * o.re - self.re * o.im) / d)

    def conj(self):
        return QQi(self.re, -self.im)

    def __eq__(self, o):
        o = _qq(o)
        return self.re == o.re and self.im == o.im

    def __hash__(self):
        return hash((self.re, self.im))

    def __bool__(self):
        return bool(self.re) or bool(self.im)

    def __repr__(self):
        if not self.im:
            return str(self.re)
        return f"({self.re}{'+' if self.im >= 0 else '-'}{abs(self.im)}i)"


def _qq(x):
    if isinstance(x, QQi):
        return x
    if isinstance(x, float):
        raise InvalidParameter("floating coefficients are not accepted; use rationals")
    return QQi(x, 0)


I_UNIT = QQi(0, 1)


@dataclass(frozen=True)
class Cutoffs:
    K_max: int = 8
    A_max: int = 8
    order_max: int = 8


@dataclass
class FourierTaylorSeries:
    """Sparse series ``{(k, alpha, order): QQi}`` in ``n`` angle/action pairs.

    Zero coefficients are never stored; every stored key respects the
    cutoffs (``|k_j| <= K_max``, ``|alpha| <= A_max``, ``order <= order_max``).
    """

    n: int
    terms: dict = field(default_factory=dict)
    cutoffs: Cutoffs = field(default_factory=Cutoffs)

    def __post_init__(self):
        clean = {}
        for key, c in self.terms.items():
            k, a, o = tuple(key[0]), tuple(key[1]), int(key[2])
            if len(k) != self.n or len(a) != self.n:
                raise InvalidParameter("term dimension does not match n")
            if any(x < 0 for x in a) or o < 0:
                raise InvalidParameter("Taylor degrees and orders must be nonnegative")
            c = _qq(c)
            if c and self._inside(k, a, o):
                clean[(k, a, o)] = clean.get((k, a, o), QQi()) + c
        self.terms = {key: c for key, c in clean.items() if c}

    # construction ------------------------------------------------------

    @classmethod
    def zero(cls, n, cutoffs=None):
        return cls(n, {}, cutoffs or Cutoffs())

    @classmethod
    def action(cls, n, j, cutoffs=None):
        a = tuple(1 if i == j else 0 for i in range(n))
        return cls(n, {((0,) * n, a, 0): QQi(1)}, cutoffs or Cutoffs())

    @classmethod
    def cos(cls, k, coef=1, alpha=None, order=0, cutoffs=None):
        """``coef * I^alpha * eps^order * cos(k.theta)``."""
        n = len(k)
        alpha = tuple(alpha or (0,) * n)
        k = tuple(k)
        half = _qq(coef) * QQi(Fraction(1, 2))
        if not any(k):
            return cls(n, {(k, alpha, order): _qq(coef)}, cutoffs or Cutoffs())
        mk = tuple(-x for x in k)
        return cls(n, {(k, alpha, order): half, (mk, alpha, order): half}, cutoffs or Cutoffs())

    @classmethod
    def sin(cls, k, coef=1, alpha=None, order=0, cutoffs=None):
        """``coef * I^alpha * eps^order * sin(k.theta)``."""
        n = len(k)
        alpha = tuple(alpha or (0,) * n)
        k = tuple(k)
        c = _qq(coef) * QQi(0, Fraction(-1, 2))
        mk = tuple(-x for x in k)
        return cls(n, {(k, alpha, order): c, (mk, alpha, order): -c}, cutoffs or Cutoffs())

    @classmethod
    def monomial(cls, alpha, coef=1, order=0, cutoffs=None):
        n = len(alpha)
        return cls(n, {((0,) * n, tuple(alpha), order): _qq(coef)}, cutoffs or Cutoffs())

    # helpers -------------------------------------------------------------

    def _inside(self, k, a, o):
        c = self.cutoffs
        return max((abs(x) for x in k), default=0) <= c.K_max and sum(a) <= c.A_max and o <= c.order_max

    def _new(self, terms):
        return FourierTaylorSeries(self.n, terms, self.cutoffs)

    def _check(self, other):
        if self.n != other.n:
            raise InvalidParameter("series have different dimensions")

    @property
    def reality(self):
        """True when ``c(-k, alpha) = conj(c(k, alpha))`` for every term."""
        for (k, a, o), c in self.terms.items():
            mk = tuple(-x for x in k)
            if self.terms.get((mk, a, o), QQi()) != c.conj():
                return False
        return True

    def is_zero(self):
        return not self.terms

    def __eq__(self, other):
        return isinstance(other, FourierTaylorSeries) and self.n == other.n and self.terms == other.terms

    def __len__(self):
        return len(self.terms)

    def orders(self):
        return sorted({o for _, _, o in self.terms})

    # arithmetic ---------------------------------------------------------

    def __add__(self, other):
        self._check(other)
        out = dict(self.terms)
        for key, c in other.terms.items():
            out[key] = out.get(key, QQi()) + c
        return self._new(out)

    def __neg__(self):
        return self._new({key: -c for key, c in self.terms.items()})

    def __sub__(self, other):
        return self + (-other)

    def scale(self, s):
        s = _qq(s)
        return self._new({key: c * s for key, c in self.terms.items()})

    def __mul__(self, other):
        if not isinstance(other, FourierTaylorSeries):
            return self.scale(other)
        self._check(other)
        if len(self.terms) * len(other.terms) > MAX_TERMS * 20:
            raise CutoffOverflow(f"product of {len(self.terms)} x {len(other.terms)} terms")
        cut = Cutoffs(min(self.cutoffs.K_max, other.cutoffs.K_max),
                      min(self.cutoffs.A_max, other.cutoffs.A_max),
                      min(self.cutoffs.order_max, other.cutoffs.order_max))
        out = {}
        for (k1, a1, o1), c1 in self.terms.items():
            for (k2, a2, o2), c2 in other.terms.items():
                o = o1 + o2
                if o > cut.order_max:
                    continue
                a = tuple(x + y for x, y in zip(a1, a2))
                if sum(a) > cut.A_max:
                    continue
                k = tuple(x + y for x, y in zip(k1, k2))
                if max(abs(x) for x in k) > cut.K_max:
                    continue
                key = (k, a, o)
                out[key] = out.get(key, QQi()) + c1 * c2
                if len(out) > MAX_TERMS:
                    raise CutoffOverflow(f"product exceeds {MAX_TERMS} stored terms")
        return FourierTaylorSeries(self.n, out, cut)

    __rmul__ = scale

    def differentiate_theta(self, j):
        return self._new({(k, a, o): c * QQi(0, k[j]) for (k, a, o), c in self.terms.items() if k[j]})

    def differentiate_I(self, j):
        out = {}
        for (k, a, o), c in self.terms.items():
            if a[j]:
                b = tuple(x - (1 if i == j else 0) for i, x in enumerate(a))
                out[(k, b, o)] = c * a[j]
        return self._new(out)

    def truncate(self, K_max=None, A_max=None, order_max=None):
        c = self.cutoffs
        cut = Cutoffs(c.K_max if K_max is None else K_max, c.A_max if A_max is None else A_max,
                      c.order_max if order_max is None else order_max)
        return FourierTaylorSeries(self.n, dict(self.terms), cut)

    def at_order(self, o):
        return self._new({key: c for key, c in self.terms.items() if key[2] == o})

    def above_order(self, o):
        return self._new({key: c for key, c in self.terms.items() if key[2] > o})

    def angle_dependent(self):
        return self._new({key: c for key, c in self.terms.items() if any(key[0])})

    # serialisation ------------------------------------------------------

    def to_list(self):
        rows = []
        for (k, a, o), c in sorted(self.terms.items()):
            rows.append({"k": list(k), "alpha": list(a), "order": o, "re": str(c.re), "im": str(c.im)})
        return rows

    @classmethod
    def from_terms(cls, rows, n=None, cutoffs=None):
        if not rows and n is None:
            raise EmptySeries("series document has no terms")
        n = n if n is not None else len(rows[0]["k"])
        terms = {}
        for r in rows:
            re = _parse_rational(r.get("re", 0))
            im = _parse_rational(r.get("im", 0))
            key = (tuple(r["k"]), tuple(r["alpha"]), int(r.get("order", 0)))
            terms[key] = terms.get(key, QQi()) + QQi(re, im)
        return cls(n, terms, cutoffs or Cutoffs())


def _parse_rational(x):
    if isinstance(x, bool) or isinstance(x, float):
        raise InvalidParameter(f"coefficient {x!r} is not an exact rational (use an int or 'p/q')")
    if isinstance(x, int):
        return Fraction(x)
    if isinstance(x, str):
        try:
            return Fraction(x)
        except ValueError as e:
            raise InvalidParameter(f"cannot parse rational {x!r}") from e
    raise InvalidParameter(f"unsupported coefficient {x!r}")


# ---------------------------------------------------------------------------
# operations
# ---------------------------------------------------------------------------

def series_ops(op, a, b=None, **kw):
    """Dispatch ``add | multiply | differentiate_theta | truncate``."""
    if op == "add":
        return a + b
    if op == "multiply":
        return a * b
    if op == "differentiate_theta":
        return a.differentiate_theta(kw["j"])
    if op == "truncate":
        return a.truncate(kw.get("K_max"), kw.get("A_max"), kw.get("order_max"))
    raise InvalidParameter(f"unknown series operation {op!r}")


def angle_average(s: FourierTaylorSeries) -> FourierTaylorSeries:
    return s._new({key: c for key, c in s.terms.items() if not any(key[0])})


def poisson(f: FourierTaylorSeries, g: FourierTaylorSeries) -> FourierTaylorSeries:
    out = FourierTaylorSeries.zero(f.n, f.cutoffs)
    for j in range(f.n):
        out = out + f.differentiate_theta(j) * g.differentiate_I(j)
        out = out - f.differentiate_I(j) * g.differentiate_theta(j)
    return out


def cross_consistent(r) -> bool:
    n = len(r)
    return all(r[j].differentiate_theta(i) == r[i].differentiate_theta(j)
               for i in range(n) for j in range(i + 1, n))


def homological_solve(r) -> FourierTaylorSeries:
    """Generator ``v`` with ``d_theta_j v = r_j`` for every ``j``.

    Raises ``NonzeroAverage`` if some ``r_j`` has angle-independent terms and
    ``InconsistentSystem`` if the cross-derivatives disagree.
    """
    r = list(r)
    if not r:
        raise EmptySeries("empty right-hand side")
    n = r[0].n
    if len(r) != n:
        raise InvalidParameter(f"need {n} right-hand sides, got {len(r)}")
    for j, rj in enumerate(r):
        if not angle_average(rj).is_zero():
            raise NonzeroAverage(f"right-hand side {j} has a nonzero angle average")
    if not cross_consistent(r):
        raise InconsistentSystem("cross-derivatives of the right-hand sides disagree")
    keys = set()
    for rj in r:
        keys.update(rj.terms)
    v = {}
    for key in sorted(keys):
        k = key[0]
        val = None
        for j in range(n):
            c = r[j].terms.get(key, QQi())
            if k[j] == 0:
                if c:
                    raise InconsistentSystem(f"term {key} in equation {j} has k_{j} = 0")
                continue
            cand = c / QQi(0, k[j])
            if val is None:
                val = cand
            elif cand != val:
                raise InconsistentSystem(f"equations disagree on term {key}")
        if val:
            v[key] = val
    out = FourierTaylorSeries(n, v, r[0].cutoffs)
    for j in range(n):
        if out.differentiate_theta(j) != r[j]:
            raise InconsistentSystem("generator check failed")
    return out


def lie_transform(v: FourierTaylorSeries, f: FourierTaylorSeries, sign: int = -1) -> FourierTaylorSeries:
    """``exp(sign * ad_v) f`` truncated at the order cutoff.

    ``v`` must have every term at order >= 1 so the series terminates.
    """
    if v.is_zero():
        return f
    if min(v.orders()) < 1:
        raise InvalidParameter("generator must be of order >= 1")
    out = f
    term = f
    m = 1
    while True:
        term = poisson(v, term)
        if term.is_zero():
            break
        out = out + term.scale(Fraction(sign ** m, factorial(m)))
        m += 1
        if m > f.cutoffs.order_max + 1:
            break
    return out


@dataclass
class NormalFormResult:
    order: int
    integrable: list  # integrable[k-1][j]: order-k average of q_j
    generators: list  # generators[k-1]
    remainders: list  # remainders[k-1][j]: q_j after step k minus I_j and integrable parts
    transformed: list  # final q_j

    def to_dict(self):
        return {
            "order": self.order,
            "integrable": [[s.to_list() for s in row] for row in self.integrable],
            "generators": [g.to_list() for g in self.generators],
            "remainders": [[s.to_list() for s in row] for row in self.remainders],
            "transformed": [s.to_list() for s in self.transformed],
        }


def _check_input(q):
    n = q[0].n
    if len(q) != n:
        raise InvalidParameter(f"need {n} series for {n} degrees of freedom, got {len(q)}")
    for j, qj in enumerate(q):
        zero = qj.at_order(0)
        if zero != FourierTaylorSeries.action(n, j, qj.cutoffs):
            raise InvalidParameter(f"q_{j} must equal I_{j} at order 0")
    return n


def bnf_reduce(q, K: int) -> NormalFormResult:
    """Remove the angle dependence of ``q`` order by order up to ``K``."""
    q = [s.truncate(order_max=K) for s in q]
    n = _check_input(q)
    integrable, gens, rems = [], [], []
    base = [FourierTaylorSeries.action(n, j, q[j].cutoffs) for j in range(n)]
    acc = list(base)
    for k in range(1, K + 1):
        part = [s.at_order(k) for s in q]
        avg = [angle_average(p) for p in part]
        r = [p - a for p, a in zip(part, avg)]
        integrable.append(avg)
        acc = [x + a for x, a in zip(acc, avg)]
        if all(x.is_zero() for x in r):
            v = FourierTaylorSeries.zero(n, q[0].cutoffs)
        else:
            if not cross_consistent(r):
                raise ObstructionAtOrder(k)
            v = homological_solve(r)
        gens.append(v)
        q = [lie_transform(v, s) for s in q]
        rems.append([s - x for s, x in zip(q, acc)])
    return NormalFormResult(K, integrable, gens, rems, q)


def replay(q, result: NormalFormResult, inverse: bool = False):
    """Apply the recorded conjugation to ``q`` (or undo it with
    ``inverse=True``)."""
    out = [s.truncate(order_max=result.order) for s in q]
    gens = result.generators[::-1] if inverse else result.generators
    for v in gens:
        out = [lie_transform(v, s, sign=+1 if inverse else -1) for s in out]
    return out


# ---------------------------------------------------------------------------
# JSON front end
# ---------------------------------------------------------------------------

def load_system(doc):
    """Read ``{"order": K, "q": [{"terms": [...]}, ...]}`` or a single
    ``{"terms": [...]}`` (taken as ``q_1``, the other ``q_j = I_j``)."""
    if isinstance(doc, str):
        doc = json.loads(doc)
    K = int(doc.get("order", 2))
    cut = Cutoffs(int(doc.get("K_max", 8)), int(doc.get("A_max", 8)), K)
    if "q" in doc:
        rows = [item["terms"] for item in doc["q"]]
        n = int(doc.get("n", len(rows)))
        q = [FourierTaylorSeries.from_terms(r, n, cut) for r in rows]
    elif "terms" in doc:
        if not doc["terms"]:
            raise EmptySeries("series document has no terms")
        first = FourierTaylorSeries.from_terms(doc["terms"], None, cut)
        n = first.n
        q = [first] + [FourierTaylorSeries.action(n, j, cut) for j in range(1, n)]
    else:
        raise InvalidParameter("document needs 'terms' or 'q'")
    return q, K


def nf_demo(doc) -> dict:
    q, K = load_system(doc)
    res = bnf_reduce(q, K)
    replayed = replay(q, res)
    exact = all(a == b for a, b in zip(replayed, res.transformed))
    out = res.to_dict()
    out["replay_exact"] = exact
    return out

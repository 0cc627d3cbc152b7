"""Reference level-set tables for the shipped surfaces.

Each row pairs the tabulated description (component count, kind,
projection singularity) with what the classifier computes. Where the two
disagree the row carries a note explaining the computed geometry.
"""

from __future__ import annotations

from dataclasses import dataclass

from .surfaces import LiouvilleTorus, SurfaceOfRevolution


@dataclass(frozen=True)
class TableRow:
    label: str
    level: str
    ref_count: int
    ref_kind: str
    ref_singularity: str
    count: int
    kind: str
    singularity: str
    note: str | None = None


SIMPLE_SPHERE = (
    TableRow("0", "c > C", 0, "-", "-", 0, "-", "-"),
    TableRow("a", "c = C", 2, "circle", "singular-leaf", 2, "circle", "singular-leaf"),
    TableRow("b", "0 < c < C", 2, "lagrangian-torus", "fold", 2, "lagrangian-torus", "fold"),
    TableRow("c", "c = 0", 1, "meridian-torus", "blow-down", 1, "meridian-torus", "blow-down"),
)

_SPHERE_DIFFEO = ("reference row lists tori projecting diffeomorphically with no singularity; "
                  "a torus cannot cover a sphere diffeomorphically. Computed: each torus "
                  "projects onto an annulus around one maximum of a, with fold edges")
_SPHERE_CYL = ("reference row lists cylinders projecting over the whole surface with no "
               "singularity. Computed: each cylinder projects onto the part of the annulus "
               "on one side of the minimum circle and has a fold at its outer edge")

GENERIC_SPHERE = (
    TableRow("0", "c > C2", 0, "-", "-", 0, "-", "-"),
    TableRow("a", "c = C2", 2, "circle", "singular-leaf", 2, "circle", "singular-leaf"),
    TableRow("b", "C1 < c < C2", 2, "lagrangian-torus", "fold", 2, "lagrangian-torus", "fold"),
    TableRow("c", "c2 < c < C1", 4, "lagrangian-torus", "none", 4, "lagrangian-torus", "fold",
             _SPHERE_DIFFEO),
    TableRow("d", "c = c2", 4, "cylinder", "none", 4, "cylinder", "fold", _SPHERE_CYL),
    TableRow("e", "0 < c < c2", 2, "lagrangian-torus", "fold", 2, "lagrangian-torus", "fold"),
    TableRow("f", "c = 0", 1, "meridian-torus", "blow-down", 1, "meridian-torus", "blow-down"),
)

_EDGE_C1 = ("level c = C1 is not tabulated. Computed: 2 circles over the lower maximum "
            "and 2 tori around the higher one")

_LIOUVILLE_SWAP = ("reference rows for c = c2+ and c = c2- appear exchanged. With "
                   "xi2^2 = c - U2, the maximum of U2 is a hyperbolic rest point of the x2 "
                   "motion, so c = c2+ gives 4 cylinders and c = c2- (minimum of U2) "
                   "gives 2 elliptic circles")

LIOUVILLE = (
    TableRow("0", "c > c1+ or c < c2-", 0, "-", "-", 0, "-", "-"),
    TableRow("a", "c = c1+", 2, "circle", "singular-leaf", 2, "circle", "singular-leaf"),
    TableRow("b", "c1- < c < c1+", 2, "lagrangian-torus", "fold", 2, "lagrangian-torus", "fold"),
    TableRow("c", "c = c1-", 4, "cylinder", "none", 4, "cylinder", "none"),
    TableRow("d", "c2+ < c < c1-", 4, "lagrangian-torus", "none", 4, "lagrangian-torus", "none"),
    TableRow("a'", "c = c2+", 2, "circle", "singular-leaf", 4, "cylinder", "none",
             _LIOUVILLE_SWAP),
    TableRow("b'", "c2- < c < c2+", 2, "lagrangian-torus", "fold", 2, "lagrangian-torus", "fold"),
    TableRow("c'", "c = c2-", -1, "", "", 2, "circle", "singular-leaf",
             "reference row is left blank. " + _LIOUVILLE_SWAP),
)


def _sphere_values(model):
    cs = model.critical()
    maxima = sorted(p.value for p in cs.maxima)
    minima = sorted(p.value for p in cs.minima)
    return maxima, minima


def _liouville_values(model):
    c1, c2 = model.critical()
    return c1.global_max, c1.global_min, c2.global_max, c2.global_min


def table_for(model):
    """The reference table matching ``model``'s critical pattern, or None."""
    if isinstance(model, SurfaceOfRevolution):
        maxima, minima = _sphere_values(model)
        if len(maxima) == 1 and not minima:
            return SIMPLE_SPHERE
        if len(maxima) == 2 and len(minima) == 1:
            return GENERIC_SPHERE
        return None
    if isinstance(model, LiouvilleTorus):
        c1p, c1m, c2p, c2m = _liouville_values(model)
        if c1p > c1m > c2p > c2m:
            n1 = len(model.critical()[0].points)
            n2 = len(model.critical()[1].points)
            if n1 == 2 and n2 == 2:
                return LIOUVILLE
    return None


def sample_levels(model):
    """One level per table row: exact critical values for edge rows,
    midpoints for open rows. Returns ``[(row, c), ...]``."""
    table = table_for(model)
    if table is None:
        return []
    if table is SIMPLE_SPHERE:
        (C,), _ = _sphere_values(model)
        levels = {"0": 1.1 * C, "a": C, "b": 0.5 * C, "c": 0.0}
    elif table is GENERIC_SPHERE:
        (C1, C2), (c2,) = _sphere_values(model)
        levels = {"0": 1.1 * C2, "a": C2, "b": 0.5 * (C1 + C2), "c": 0.5 * (c2 + C1),
                  "d": c2, "e": 0.5 * c2, "f": 0.0}
    else:
        c1p, c1m, c2p, c2m = _liouville_values(model)
        levels = {"0": c1p + 0.1 * (c1p - c2m), "a": c1p, "b": 0.5 * (c1p + c1m), "c": c1m,
                  "d": 0.5 * (c2p + c1m), "a'": c2p, "b'": 0.5 * (c2p + c2m), "c'": c2m}
    return [(row, levels[row.label]) for row in table]


def locate_row(model, c):
    """The table row containing level ``c`` (edges matched exactly)."""
    table = table_for(model)
    if table is None:
        return None
    if table is LIOUVILLE:
        c1p, c1m, c2p, c2m = _liouville_values(model)
        key = c
        edges = {c1p: "a", c1m: "c", c2p: "a'", c2m: "c'"}
        if key in edges:
            label = edges[key]
        elif key > c1p or key < c2m:
            label = "0"
        elif key > c1m:
            label = "b"
        elif key > c2p:
            label = "d"
        else:
            label = "b'"
    else:
        key = abs(c)
        maxima, minima = _sphere_values(model)
        if key == 0:
            label = "c" if table is SIMPLE_SPHERE else "f"
        elif key > maxima[-1]:
            label = "0"
        elif key == maxima[-1]:
            label = "a"
        elif table is SIMPLE_SPHERE:
            label = "b"
        else:
            C1, c2 = maxima[0], minima[0]
            if key == C1:
                return None
            if key > C1:
                label = "b"
            elif key > c2:
                label = "c"
            elif key == c2:
                label = "d"
            else:
                label = "e"
    return next(r for r in table if r.label == label)


def discrepancy_notes(model, classification):
    """Notes to attach to a classification whose level falls on a row that
    disagrees with the reference table."""
    table = table_for(model)
    if table is None:
        return []
    if table is GENERIC_SPHERE:
        maxima, _ = _sphere_values(model)
        if abs(classification.c) == maxima[0]:
            return [_EDGE_C1]
    row = locate_row(model, classification.c)
    if row is None or row.note is None:
        return []
    return [f"row ({row.label}) {row.level}: {row.note}"]


def compare_table(model):
    """Classify every row level and report reference versus computed."""
    from .classical import classify_level

    out = []
    for row, c in sample_levels(model):
        cls = classify_level(model, c)
        kinds = sorted({comp.kind for comp in cls.components})
        sings = sorted({comp.singularity for comp in cls.components})
        kind = kinds[0] if len(kinds) == 1 else ("-" if not kinds else "+".join(kinds))
        sing = sings[0] if len(sings) == 1 else ("-" if not sings else "+".join(sings))
        matches_computed = (cls.m_cl == row.count and kind == row.kind and sing == row.singularity)
        matches_reference = (cls.m_cl == row.ref_count and kind == row.ref_kind
                             and sing == row.ref_singularity)
        out.append({"row": row.label, "level": row.level, "c": c,
                    "reference": {"count": row.ref_count, "kind": row.ref_kind,
                                  "singularity": row.ref_singularity},
                    "computed": {"count": cls.m_cl, "kind": kind, "singularity": sing},
                    "expected_computed": matches_computed,
                    "matches_reference": matches_reference,
                    "note": row.note})
    return out

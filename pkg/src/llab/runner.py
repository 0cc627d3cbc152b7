"""Experiment orchestration: canonical configs, cached runs, output files.

Every run writes into ``<out>/<cache key>/`` a set of primary outputs plus
``manifest.json`` listing their SHA-256 digests. Floats are written with 17
significant digits so reruns are byte-identical.
"""

from __future__ import annotations

import hashlib
import json
import math
import os
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.stats import linregress

from . import __version__
from .bohr_sommerfeld import bs_spectrum, detect_resonance, principal_family
from .classical import MomentValue, action_vector, classify_level
from .errors import (
    CacheCorrupt,
    EmptySeries,
    InvalidParameter,
    LlabError,
    UpstreamMissing,
)
from .fitting import fit_exponent
from .grids import Grid1D
from .modes import assemble_mode, solve_liouville, solve_surface_rev, solve_torus_rev
from .normal_form import nf_demo
from .quasimodes import (
    build_wkb,
    compute_norms,
    density_compare,
    norm_ladder,
    predict_exponents,
    radial_overlap,
)
from .reference_tables import compare_table
from .surfaces import (
    BUILTINS,
    LiouvilleTorus,
    SurfaceOfRevolution,
    TorusOfRevolution,
    make_builtin,
    model_from_dict,
    validate,
)

COMMANDS = ("validate", "classify", "actions", "bs-spectrum", "modes", "norms", "exponents",
            "compare", "resonance", "nf-demo", "report")
DEFAULT_OUT = "llab-out"


# ---------------------------------------------------------------------------
# deterministic serialisation
# ---------------------------------------------------------------------------

def fmt(x):
    """17 significant digits for floats, plain ints otherwise."""
    if isinstance(x, (bool, np.bool_)):
        return "true" if x else "false"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    x = float(x)
    if math.isnan(x):
        return "NaN"
    if math.isinf(x):
        return "Infinity" if x > 0 else "-Infinity"
    out = format(x, ".17g")
    # keep floats recognisable as floats so configs re-hash identically
    return out if any(ch in out for ch in ".e") else out + ".0"


def dumps(obj, indent=0):
    """JSON with sorted keys and 17-digit floats."""
    pad = "  " * (indent + 1)
    end = "  " * indent
    if isinstance(obj, dict):
        if not obj:
            return "{}"
        items = [f"{pad}{json.dumps(str(k))}: {dumps(obj[k], indent + 1)}"
                 for k in sorted(obj, key=str)]
        return "{\n" + ",\n".join(items) + "\n" + end + "}"
    if isinstance(obj, (list, tuple)):
        if not obj:
            return "[]"
        return "[\n" + ",\n".join(pad + dumps(v, indent + 1) for v in obj) + "\n" + end + "]"
    if obj is None:
        return "null"
    if isinstance(obj, str):
        return json.dumps(obj)
    if isinstance(obj, (bool, np.bool_, int, np.integer, float, np.floating)):
        out = fmt(obj)
        return json.dumps(out) if out in ("NaN", "Infinity", "-Infinity") else out
    raise TypeError(f"cannot serialise {type(obj).__name__}")


def csv_text(header, rows):
    lines = [",".join(header)]
    for r in rows:
        lines.append(",".join(v if isinstance(v, str) else fmt(v) for v in r))
    return "\n".join(lines) + "\n"


def canonical(config):
    return json.dumps(config, sort_keys=True, separators=(",", ":"), default=str)


def cache_key(config, version=__version__):
    """SHA-256 of the canonical config plus the tool version."""
    blob = canonical({"config": config, "version": version})
    return hashlib.sha256(blob.encode()).hexdigest()[:20]


def _digest(data: bytes):
    return hashlib.sha256(data).hexdigest()


# ---------------------------------------------------------------------------
# configuration
# ---------------------------------------------------------------------------

def load_surface(spec):
    """A model from a surface-spec JSON path or a builtin name."""
    if spec is None:
        raise InvalidParameter("--surface is required for this command")
    if isinstance(spec, dict):
        return model_from_dict(spec)
    p = Path(spec)
    if p.is_file():
        try:
            doc = json.loads(p.read_text())
        except json.JSONDecodeError as e:
            raise InvalidParameter(f"{spec}: not valid JSON ({e})") from e
        return model_from_dict(doc)
    if spec in BUILTINS:
        return make_builtin(spec)
    raise InvalidParameter(f"surface {spec!r} is neither a file nor a builtin ({', '.join(BUILTINS)})")


def parse_range(text, default=None):
    """``"a"``, ``"a:b"`` or ``"a:b:step"`` (inclusive) to a list of ints."""
    if text is None:
        if default is None:
            return None
        return list(default)
    parts = str(text).split(":")
    try:
        nums = [int(p) for p in parts]
    except ValueError as e:
        raise InvalidParameter(f"bad integer range {text!r}") from e
    if len(nums) == 1:
        return nums
    if len(nums) not in (2, 3):
        raise InvalidParameter(f"bad integer range {text!r}")
    step = nums[2] if len(nums) == 3 else 1
    if step <= 0 or nums[1] < nums[0]:
        raise InvalidParameter(f"bad integer range {text!r}")
    return list(range(nums[0], nums[1] + 1, step))


def parse_window(text):
    if text is None:
        return None
    try:
        lo, hi = (float(x) for x in str(text).split(":"))
    except ValueError as e:
        raise InvalidParameter(f"bad window {text!r}; use lo:hi") from e
    if not hi > lo:
        raise InvalidParameter("window needs lo < hi")
    return [lo, hi]


def parse_plist(text):
    if text is None:
        return [2, 4, 6, "inf"]
    out = []
    for tok in str(text).split(","):
        tok = tok.strip()
        if tok in ("inf", "infinity", "oo"):
            out.append("inf")
            continue
        try:
            p = float(tok)
        except ValueError as e:
            raise InvalidParameter(f"bad p {tok!r}") from e
        if p < 2:
            raise InvalidParameter("p must be >= 2")
        out.append(int(p) if p == int(p) else p)
    return out


@dataclass
class RunRecord:
    key: str
    version: str
    directory: Path
    outputs: dict
    wall_time: float
    cached: bool = False
    config: dict = field(default_factory=dict)


# ---------------------------------------------------------------------------
# command bodies: each returns {filename: text}
# ---------------------------------------------------------------------------

def _cmd_validate(model, P):
    rep = validate(model)
    if not rep.usable:
        raise InvalidParameter(f"surface fails {', '.join(rep.failed())}")
    return {"validate.json": dumps(rep.to_dict())}


def _require_c(P):
    if P.get("c") is None:
        raise InvalidParameter("--c is required for this command")
    return float(P["c"])


def _cmd_classify(model, P):
    cls = classify_level(model, _require_c(P))
    return {"classify.json": dumps([c.to_dict() for c in cls.components]),
            "classification.json": dumps(cls.to_dict())}


def _cmd_actions(model, P):
    c = _require_c(P)
    cls = classify_level(model, c)
    rows = []
    for i in cls.tori():
        av = action_vector(model, MomentValue(1.0, c), cls.components[i])
        rows.append((c, av.I1, av.I2, i))
    return {"actions.csv": csv_text(("c", "I1", "I2", "component_index"), rows)}


def _cmd_bs(model, P):
    fam = principal_family(model)
    m_range = parse_range(P.get("m_range"), range(0, 6))
    n_range = parse_range(P.get("n_range"), range(0, 6))
    states = bs_spectrum(model, fam, fam.default_maslov(), m_range, n_range)
    rows = [(s.m, s.n, s.lam, fam.id) for s in states]
    return {"bs_spectrum.csv": csv_text(("m", "n", "lambda", "family"), rows)}


def _angular_samples(q):
    return max(16, 4 * abs(int(q)) + 8)


def iter_modes(model, P):
    """Yield ``(pair, sampled mode)`` for the configured ranges, sorted by
    quantum numbers."""
    res = int(P.get("resolution") or 512)
    if isinstance(model, LiouvilleTorus):
        window = parse_window(P.get("window"))
        if window is None:
            raise InvalidParameter("Liouville surfaces need --window lo:hi")
        grid = Grid1D.periodic(int(P.get("grid") or 256))
        for r in solve_liouville(model, window, grid):
            yield r, assemble_mode(r, res)
        return
    m_range = parse_range(P.get("m_range"), [0])
    n_range = parse_range(P.get("n_range"), range(0, 5))
    if min(n_range) < 0:
        raise InvalidParameter("n indices must be >= 0")
    count = max(n_range) + 1
    for q in m_range:
        if isinstance(model, SurfaceOfRevolution):
            grid = Grid1D.pole_regular(int(P.get("grid") or 4096), model.L)
            pairs = solve_surface_rev(model, q, count, grid)
        else:
            grid = Grid1D.periodic(int(P.get("grid") or 1024))
            pairs = solve_torus_rev(model, q, count, grid)
        for n in n_range:
            yield pairs[n], assemble_mode(pairs[n], res, P.get("angular") or "exp",
                                          _angular_samples(q))


def _qpair(pair):
    return tuple(int(x) for x in pair.qnums)


def _cmd_modes(model, P):
    rows = []
    dumps_ = {}
    for pair, mode in iter_modes(model, P):
        q1, q2 = _qpair(pair)
        rows.append((pair.family, q1, q2, pair.lambda2, mode.l2()))
        if P.get("dump"):
            if hasattr(pair, "factor"):
                x, v = pair.grid.nodes, pair.factor
                cols = [x, np.real(v), np.imag(v)]
                head = "# x re im"
            else:
                x = pair.grid.nodes
                cols = [x, pair.f, pair.g]
                head = "# x f g"
            lines = [head] + [" ".join(fmt(c[i]) for c in cols) for i in range(len(x))]
            dumps_[f"factor_{q1}_{q2}.txt"] = "\n".join(lines) + "\n"
    rows.sort(key=lambda r: (r[3], r[1], r[2]))
    out = {"modes.csv": csv_text(("family", "q1", "q2", "lambda2", "norm_check"), rows)}
    out.update(dumps_)
    return out


def _norm_rows(model, P):
    plist = parse_plist(P.get("p_list"))
    rows = []
    for pair, mode in iter_modes(model, P):
        rows.append(compute_norms(mode, plist, normalized_volume=bool(P.get("normalized_volume"))))
    return rows, plist


def _cmd_norms(model, P):
    rows, plist = _norm_rows(model, P)
    out = []
    for r in sorted(rows, key=lambda r: (r.lambda2, r.qnums)):
        for p in plist:
            key = "inf" if p == "inf" else float(p)
            out.append((r.lam, str(p), r.norms[key]))
    return {"norms.csv": csv_text(("lambda", "p", "value"), out)}


def ladder_singularity(model, P):
    """Singularity driving a sup-norm ladder: blow-down for zonal sphere
    ladders, singular-leaf for ground sectors of a non-flat torus of
    revolution, none on flat tori, fold otherwise."""
    if P.get("singularity"):
        return P["singularity"]
    if isinstance(model, SurfaceOfRevolution):
        return "blow-down" if parse_range(P.get("m_range"), [0]) == [0] else "fold"
    if isinstance(model, TorusOfRevolution):
        if model.conformal.is_constant:
            return "none"
        return "singular-leaf" if parse_range(P.get("n_range"), [0]) == [0] else "fold"
    return "fold"


def _cmd_exponents(model, P):
    rows, plist = _norm_rows(model, P)
    conv = P.get("convention") or "eigenvalue"
    rep = norm_ladder(sorted(rows, key=lambda r: r.lambda2), conv)
    sing = ladder_singularity(model, P)
    pred = {str(d["p"]): d for d in predict_exponents(sing, plist)}
    out = []
    for p in plist:
        key = "inf" if p == "inf" else float(p)
        fitted, stderr = rep.fits[key]
        pk = "inf" if p == "inf" else str(float(p))
        out.append({"p": str(p), "fitted": fitted, "stderr": stderr,
                    "predicted": pred[pk][conv], "convention": conv, "singularity": sing})
    plot = emit_plotdata([(r.lambda2 if conv == "eigenvalue" else r.lam, r.norms["inf"])
                          for r in rep.rows], "loglog-fit",
                         predicted=pred["inf"][conv] if "inf" in pred else None)
    files = {"exponents.json": dumps(out), "norm_ladder.json": dumps(rep.to_dict())}
    files.update({f"plot_sup.{k}": v for k, v in plot.items()})
    return files


def _cmd_compare(model, P):
    if isinstance(model, LiouvilleTorus):
        raise InvalidParameter("compare runs on revolution families")
    res = int(P.get("resolution") or 8192)
    fam = principal_family(model)
    out = []
    m_range = parse_range(P.get("m_range"), [10])
    n_range = parse_range(P.get("n_range"), [10])
    for m in m_range:
        for n in n_range:
            if isinstance(model, SurfaceOfRevolution):
                grid = Grid1D.pole_regular(int(P.get("grid") or 4096), model.L)
                pair = solve_surface_rev(model, m, n + 1, grid)[n]
            else:
                grid = Grid1D.periodic(int(P.get("grid") or 1024))
                pair = solve_torus_rev(model, m, n + 1, grid)[n]
            spec = build_wkb(model, (m, n), resolution=res)
            comp = fam.component(spec.b.c)
            dc = density_compare(pair, _signed_component(comp, model, spec.b.c, m), resolution=res)
            out.append({"m": m, "n": n, "lambda_exact": pair.frequency, "lambda_bs": spec.frequency,
                        "overlap": radial_overlap(spec, pair), "correlation": dc.correlation,
                        "l1": dc.l1})
    return {"compare.json": dumps(out)}


def _signed_component(comp, model, c, m):
    """The torus of the family at level ``c`` whose angular momentum has the
    sign of ``m``."""
    cls = classify_level(model, c, strict=False)
    want = 1 if m >= 0 else -1
    for cc in cls.components:
        if (cc.index == comp.index and len(cc.orbits) > 1 and cc.orbits[1].direction == want
                and cc.kind == comp.kind):
            return cc
    return comp


def _cmd_resonance(model, P):
    return {"resonance.json": dumps(detect_resonance(model, _require_c(P)).to_dict())}


def _cmd_nf(P):
    src = P.get("series")
    if src is None:
        raise InvalidParameter("nf-demo needs --series <json>")
    doc = P.get("series_doc")
    return {"nf_demo.json": dumps(nf_demo(doc))}


# ---------------------------------------------------------------------------
# plot data
# ---------------------------------------------------------------------------

def emit_plotdata(series, kind, predicted=None):
    """Two-column text data plus a JSON sidecar, as ``{"dat": .., "json": ..}``.

    ``loglog-fit``: ``(lambda, value)`` pairs, the sidecar carries the
    fitted slope and the predicted one. ``density-overlay``: ``(x, quantum,
    classical)`` triples. ``spectrum-ladder``: eigenvalues, written sorted
    with their rank.
    """
    series = list(series)
    if not series:
        raise EmptySeries("nothing to plot")
    if kind == "loglog-fit":
        series = sorted(series)
        x = np.array([s[0] for s in series], dtype=float)
        y = np.array([s[1] for s in series], dtype=float)
        lx, ly = np.log(x), np.log(y)
        if len(x) >= 2 and np.ptp(lx) > 0 and np.ptp(ly) > 0:
            fit = linregress(lx, ly)
            slope, icpt, err = float(fit.slope), float(fit.intercept), float(fit.stderr)
        else:
            slope, icpt, err = 0.0, float(ly.mean()), 0.0
        data = [(a, b) for a, b in zip(x, y)]
        side = {"kind": kind, "columns": ["lambda", "value"], "xscale": "log", "yscale": "log",
                "fit": {"slope": slope, "intercept": icpt, "stderr": err},
                "predicted_slope": predicted}
    elif kind == "density-overlay":
        data = [tuple(s) for s in series]
        side = {"kind": kind, "columns": ["x", "quantum", "classical"], "xscale": "linear",
                "yscale": "linear"}
    elif kind == "spectrum-ladder":
        vals = sorted(float(s if np.isscalar(s) else s[0]) for s in series)
        data = [(i, v) for i, v in enumerate(vals)]
        side = {"kind": kind, "columns": ["rank", "lambda2"], "xscale": "linear",
                "yscale": "linear"}
    else:
        raise InvalidParameter(f"unknown plot kind {kind!r}")
    text = "\n".join(" ".join(fmt(v) for v in row) for row in data) + "\n"
    return {"dat": text, "json": dumps(side)}


# ---------------------------------------------------------------------------
# runs and cache
# ---------------------------------------------------------------------------

def out_root(out=None):
    return Path(out or os.environ.get("LLAB_OUT") or DEFAULT_OUT)


def make_config(command, params):
    """Canonical config: the surface is stored by content, not by path."""
    if command not in COMMANDS:
        raise InvalidParameter(f"unknown command {command!r}")
    P = {k: v for k, v in params.items() if v is not None and k not in ("out", "no_cache")}
    cfg = {"command": command, "deterministic": True}
    if command == "nf-demo":
        src = P.get("series")
        if src is None:
            raise InvalidParameter("nf-demo needs --series <json>")
        try:
            doc = json.loads(Path(src).read_text())
        except (OSError, json.JSONDecodeError) as e:
            raise InvalidParameter(f"cannot read series {src}: {e}") from e
        cfg["series_doc"] = doc
        P = {k: v for k, v in P.items() if k != "series"}
    elif command == "report":
        cfg["runs"] = sorted(P.pop("runs", None) or [])
        if P.get("surface") is not None:
            cfg["surface"] = load_surface(P.pop("surface")).to_dict()
    else:
        cfg["surface"] = load_surface(P.pop("surface", None)).to_dict()
    cfg["params"] = {k: v for k, v in sorted(P.items())}
    return cfg


def _write(dirpath: Path, files: dict, config, key, wall):
    dirpath.mkdir(parents=True, exist_ok=True)
    digests = {}
    for name in sorted(files):
        data = files[name].encode()
        (dirpath / name).write_bytes(data)
        digests[name] = _digest(data)
    manifest = {"key": key, "version": __version__, "config": config, "files": digests}
    (dirpath / "manifest.json").write_text(dumps(manifest) + "\n")
    (dirpath / "timing.json").write_text(json.dumps({"wall_time": wall}) + "\n")
    return digests


def read_run(dirpath: Path, key=None):
    """Load a cached run, verifying every digest (``CacheCorrupt`` on any
    mismatch)."""
    mpath = dirpath / "manifest.json"
    if not mpath.is_file():
        raise UpstreamMissing(f"no run at {dirpath}")
    try:
        manifest = json.loads(mpath.read_text())
    except json.JSONDecodeError as e:
        raise CacheCorrupt(f"{mpath}: unreadable manifest") from e
    if key is not None and manifest.get("key") != key:
        raise CacheCorrupt(f"{dirpath}: manifest key does not match the directory")
    if key is not None and cache_key(manifest.get("config"), manifest.get("version")) != key:
        raise CacheCorrupt(f"{dirpath}: config hash mismatch")
    outputs = {}
    for name, dig in manifest.get("files", {}).items():
        p = dirpath / name
        if not p.is_file():
            raise CacheCorrupt(f"{p} is missing")
        data = p.read_bytes()
        if _digest(data) != dig:
            raise CacheCorrupt(f"{p}: content hash mismatch")
        outputs[name] = p
    return manifest, outputs


def run(command, params=None, out=None, use_cache=True) -> RunRecord:
    """Execute (or serve from cache) one command."""
    params = dict(params or {})
    cfg = make_config(command, params)
    key = cache_key(cfg)
    root = out_root(out)
    d = root / key
    if use_cache and (d / "manifest.json").is_file():
        manifest, outputs = read_run(d, key)
        return RunRecord(key, __version__, d, outputs, 0.0, True, cfg)
    t0 = time.perf_counter()
    files = _execute(command, cfg, root)
    wall = time.perf_counter() - t0
    _write(d, files, cfg, key, wall)
    return RunRecord(key, __version__, d, {n: d / n for n in sorted(files)}, wall, False, cfg)


def _execute(command, cfg, root):
    P = dict(cfg.get("params", {}))
    if command == "nf-demo":
        P["series"] = True
        P["series_doc"] = cfg["series_doc"]
        return _cmd_nf(P)
    if command == "report":
        return _cmd_report(cfg, root)
    model = model_from_dict(cfg["surface"])
    if command != "validate":
        rep = validate(model)
        if not rep.usable:
            raise InvalidParameter(f"surface fails {', '.join(rep.failed())}")
    table = {"validate": _cmd_validate, "classify": _cmd_classify, "actions": _cmd_actions,
             "bs-spectrum": _cmd_bs, "modes": _cmd_modes, "norms": _cmd_norms,
             "exponents": _cmd_exponents, "compare": _cmd_compare, "resonance": _cmd_resonance}
    return table[command](model, P)


def _cmd_report(cfg, root: Path):
    keys = cfg.get("runs")
    if not keys:
        keys = sorted(p.name for p in root.iterdir()
                      if (p / "manifest.json").is_file()) if root.is_dir() else []
    runs, exponents, tables, plots = [], [], [], {}
    for key in keys:
        d = root / key
        if not d.is_dir():
            raise UpstreamMissing(f"run {key} is not in {root}")
        manifest, outputs = read_run(d, key)
        conf = manifest["config"]
        if conf.get("command") == "report":
            continue
        runs.append({"key": key, "command": conf.get("command"),
                     "surface": (conf.get("surface") or {}).get("name"),
                     "files": sorted(outputs)})
        if "exponents.json" in outputs:
            for row in json.loads(outputs["exponents.json"].read_text()):
                exponents.append(dict(row, run=key, surface=(conf.get("surface") or {}).get("name")))
            for ext in ("dat", "json"):
                name = f"plot_sup.{ext}"
                if name in outputs:
                    plots[f"plot_{key}_sup.{ext}"] = outputs[name].read_text()
    if cfg.get("surface") is not None:
        model = model_from_dict(cfg["surface"])
        tables = compare_table(model)
    report = {"version": __version__, "runs": runs, "exponents": exponents,
              "classification_table": tables}
    files = {"report.json": dumps(report)}
    files.update(plots)
    return files


__all__ = ["COMMANDS", "RunRecord", "cache_key", "canonical", "dumps", "emit_plotdata", "run",
           "read_run", "make_config", "load_surface", "parse_range", "parse_plist",
           "parse_window", "LlabError"]

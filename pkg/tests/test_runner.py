import json

import numpy as np
import pytest

from llab import __version__
from llab.cli import main
from llab.errors import CacheCorrupt, EmptySeries, InvalidParameter, UpstreamMissing
from llab.runner import (
    cache_key,
    dumps,
    emit_plotdata,
    fmt,
    make_config,
    parse_plist,
    parse_range,
    parse_window,
    read_run,
    run,
)

SURFACE = {"family": "torus-of-revolution", "name": "bourgain", "params": [0.1],
           "conformal": {"kind": "named-analytic", "name": "bourgain", "params": [0.1],
                         "period": 1.0}}


def _surface_file(tmp_path, doc, name="s.json"):
    p = tmp_path / name
    p.write_text(json.dumps(doc))
    return str(p)


def test_key_ignores_file_key_order(tmp_path):
    a = _surface_file(tmp_path, SURFACE, "a.json")
    b = _surface_file(tmp_path, dict(reversed(list(SURFACE.items()))), "b.json")
    ka = cache_key(make_config("classify", {"surface": a, "c": 0.5}))
    kb = cache_key(make_config("classify", {"surface": b, "c": 0.5}))
    assert ka == kb


def test_key_tracks_parameters_and_version(tmp_path):
    doc2 = json.loads(json.dumps(SURFACE).replace("0.1", "0.2"))
    cfg1 = make_config("classify", {"surface": _surface_file(tmp_path, SURFACE, "a.json"), "c": 0.5})
    cfg2 = make_config("classify", {"surface": _surface_file(tmp_path, doc2, "b.json"), "c": 0.5})
    assert cache_key(cfg1) != cache_key(cfg2)
    assert cache_key(cfg1, "0.1.0") != cache_key(cfg1, "0.2.0")
    assert cache_key(cfg1) == cache_key(cfg1, __version__)


def test_fmt_round_trips():
    for x in (0.1, 1.0, 2.0 / 3.0, 1e-300, -5.0, 12345678.9):
        assert float(fmt(x)) == x
    assert fmt(3.0) == "3.0"
    assert fmt(3) == "3"
    assert dumps({"b": 1.0, "a": [1, 0.5]}) == dumps({"a": [1, 0.5], "b": 1.0})


def test_parsers():
    assert list(parse_range("3")) == [3]
    assert list(parse_range("1:4")) == [1, 2, 3, 4]
    assert list(parse_range("10:30:10")) == [10, 20, 30]
    assert list(parse_window("-1:2.5")) == [-1.0, 2.5]
    assert parse_plist(None) == [2.0, 4.0, 6.0, "inf"]
    for bad in ("a", "3:1", "1:5:0"):
        with pytest.raises(InvalidParameter):
            parse_range(bad)
    with pytest.raises(InvalidParameter):
        parse_window("2:1")
    with pytest.raises(InvalidParameter):
        parse_plist("1,inf")


def test_classify_run_and_cache(tmp_path):
    rec = run("classify", {"surface": "round-sphere", "c": 0.0}, out=str(tmp_path))
    doc = json.loads((rec.directory / "classification.json").read_text())
    assert doc["m_cl"] == 1
    assert doc["components"][0]["singularity"] == "blow-down"
    again = run("classify", {"surface": "round-sphere", "c": 0.0}, out=str(tmp_path))
    assert again.cached and again.key == rec.key
    fresh = run("classify", {"surface": "round-sphere", "c": 0.0}, out=str(tmp_path),
                use_cache=False)
    for name in rec.outputs:
        assert (fresh.directory / name).read_bytes() == (rec.directory / name).read_bytes()


def test_cache_corruption_detected(tmp_path):
    rec = run("classify", {"surface": "round-sphere", "c": 0.5}, out=str(tmp_path))
    target = rec.directory / "classification.json"
    target.write_text(target.read_text() + " ")
    with pytest.raises(CacheCorrupt):
        run("classify", {"surface": "round-sphere", "c": 0.5}, out=str(tmp_path))


def test_report_missing_upstream(tmp_path):
    with pytest.raises(UpstreamMissing):
        run("report", {"runs": ["0123456789abcdef0123"]}, out=str(tmp_path))
    with pytest.raises(UpstreamMissing):
        read_run(tmp_path / "nothing")


def test_emit_loglog():
    lam = np.geomspace(10, 1e4, 10)
    out = emit_plotdata(list(zip(lam, lam ** 0.125)), "loglog-fit", predicted=0.125)
    side = json.loads(out["json"])
    assert side["fit"]["slope"] == pytest.approx(0.125, abs=1e-12)
    assert side["predicted_slope"] == 0.125
    assert len(out["dat"].splitlines()) == 10


def test_emit_density_and_ladder():
    x = np.linspace(0, 1, 5)
    out = emit_plotdata([(a, 1.0, 1.0) for a in x], "density-overlay")
    cols = np.array([[float(v) for v in line.split()] for line in out["dat"].splitlines()])
    assert np.array_equal(cols[:, 1], cols[:, 2])
    lam2 = [4 * np.pi**2 * (a * a + b * b) for a in range(3) for b in range(3)]
    out = emit_plotdata(lam2[::-1], "spectrum-ladder")
    vals = [float(line.split()[1]) for line in out["dat"].splitlines()]
    assert vals == sorted(lam2)
    with pytest.raises(EmptySeries):
        emit_plotdata([], "loglog-fit")
    with pytest.raises(InvalidParameter):
        emit_plotdata([1.0], "pie")


def test_cli_exit_codes(tmp_path, capsys):
    assert main(["classify", "--surface", "round-sphere", "--c", "0", "--out", str(tmp_path)]) == 0
    out = capsys.readouterr().out
    assert "classification.json" in out
    assert main(["classify", "--surface", "no-such-surface", "--c", "0",
                 "--out", str(tmp_path)]) == 2
    assert main(["classify", "--surface", "round-sphere", "--out", str(tmp_path)]) == 2
    with pytest.raises(SystemExit):
        main(["bogus"])


def test_cli_modes_and_exponents(tmp_path):
    out = str(tmp_path)
    assert main(["modes", "--surface", "flat-torus", "--m-range", "0:2", "--n-range", "0:2",
                 "--out", out]) == 0
    assert main(["exponents", "--surface", "flat-torus", "--m-range", "1:8", "--n-range", "0",
                 "--resolution", "64", "--out", out]) == 0
    runs = [p for p in tmp_path.iterdir() if (p / "exponents.json").exists()]
    (d,) = runs
    rows = json.loads((d / "exponents.json").read_text())
    sup = [r for r in rows if r["p"] == "inf"][0]
    assert abs(sup["fitted"]) <= 1e-10
    assert main(["report", "--surface", "round-sphere", "--out", out]) == 0


def test_nf_demo_cli(tmp_path):
    series = tmp_path / "q.json"
    series.write_text(json.dumps({"order": 2, "terms": [
        {"k": [0], "alpha": [1], "order": 0, "re": 1},
        {"k": [1], "alpha": [1], "order": 1, "re": "1/2"},
        {"k": [-1], "alpha": [1], "order": 1, "re": "1/2"}]}))
    rec = run("nf-demo", {"series": str(series)}, out=str(tmp_path))
    doc = json.loads((rec.directory / "nf_demo.json").read_text())
    assert doc["replay_exact"] is True
    assert doc["integrable"][1][0] == [{"k": [0], "alpha": [1], "order": 2,
                                        "re": "-1/2", "im": "0"}]

import numpy as np
import pytest
from scipy.integrate import quad

from llab.classical import (
    MomentValue,
    PhasePoint,
    action_I2,
    action_vector,
    classify_level,
    critical_levels,
    histogram_density,
    integrate_geodesic,
    moment_map,
    pushforward_density,
    to_pole,
    to_polar,
)
from llab.errors import NearCriticalAmbiguity, NotATorus, ZeroCovector
from llab.grids import Grid1D


def _density_at(model, comp, b, r):
    g = Grid1D(np.array([r]), np.array([1.0]), "pole-regular", 0.0, 1.0)
    return float(pushforward_density(model, comp, b, g)[0])


def test_moment_map_equator(sphere):
    b = moment_map(sphere, PhasePoint("polar", (np.pi / 2, 0.3), (0.0, 1.0)))
    assert (b.b1, b.b2) == pytest.approx((1.0, 1.0), abs=1e-15)


def test_moment_map_meridian(sphere):
    b = moment_map(sphere, PhasePoint("polar", (1.0, 0.3), (1.0, 0.0)))
    assert (b.b1, b.b2) == pytest.approx((1.0, 0.0), abs=1e-15)


def test_zero_covector(sphere):
    with pytest.raises(ZeroCovector):
        moment_map(sphere, PhasePoint("polar", (1.0, 0.0), (0.0, 0.0)))


def test_pole_chart_roundtrip(sphere):
    z = PhasePoint("polar", (0.02, 1.1), (0.7, 0.01))
    back = to_polar(sphere, to_pole(sphere, z, "north"))
    assert back.q == pytest.approx(z.q, abs=1e-12)
    assert back.p == pytest.approx(z.p, abs=1e-12)
    m0, m1 = moment_map(sphere, z), moment_map(sphere, to_pole(sphere, z, "north"))
    assert (m1.b1, m1.b2) == pytest.approx((m0.b1, m0.b2), rel=1e-12)


def test_classify_sphere_meridian(sphere):
    cls = classify_level(sphere, 0.0)
    (comp,) = cls.components
    assert comp.kind == "meridian-torus"
    assert comp.singularity == "blow-down"


def test_classify_sphere_annulus(sphere):
    cls = classify_level(sphere, 0.5)
    assert cls.m_cl == 2
    assert sorted(c.orientation for c in cls.components) == ["+", "-"]
    for comp in cls.components:
        assert comp.singularity == "fold"
        lo, hi = comp.projection[0]
        assert lo == pytest.approx(np.arcsin(0.5), abs=1e-12)
        assert hi == pytest.approx(np.pi - np.arcsin(0.5), abs=1e-12)


def test_classify_sphere_edge_and_empty(sphere):
    cls = classify_level(sphere, 1.0)
    assert cls.m_cl == 2
    assert {c.kind for c in cls.components} == {"circle"}
    assert {c.singularity for c in cls.components} == {"singular-leaf"}
    assert classify_level(sphere, 1.5).m_cl == 0


def test_classify_liouville_top_level(liouville):
    top = critical_levels(liouville)[-1]
    cls = classify_level(liouville, top)
    assert cls.m_cl == 2
    assert all(c.kind == "circle" and c.singularity == "singular-leaf" for c in cls.components)


def test_near_critical_ambiguity(liouville):
    top = critical_levels(liouville)[-1]
    with pytest.raises(NearCriticalAmbiguity):
        classify_level(liouville, top - 5e-11)


def test_critical_levels_sorted(two_bump, liouville):
    for m in (two_bump, liouville):
        lv = critical_levels(m)
        assert lv == sorted(lv)
    assert len(critical_levels(two_bump)) == 4  # 0, c2, C1, C2


@pytest.mark.parametrize("c", [0.1 * k for k in range(10)])
def test_action_identity(sphere, c):
    comp = classify_level(sphere, c).components[0]
    assert action_I2(sphere, MomentValue(1.0, c), comp) == pytest.approx(1.0, abs=1e-10)


@pytest.mark.parametrize("c", [0.1, 0.45, 0.8])
def test_radial_action_against_quadrature(sphere, c):
    # independent check of the fold quadrature: plain adaptive quad of
    # sqrt(1 - c^2 / sin^2 r) over the allowed interval equals pi (1 - c)
    lo, hi = np.arcsin(c), np.pi - np.arcsin(c)
    val, _ = quad(lambda r: np.sqrt(max(0.0, 1 - c * c / np.sin(r) ** 2)), lo, hi,
                  limit=400, epsabs=1e-13)
    assert val == pytest.approx(np.pi * (1 - c), rel=1e-9)
    comp = classify_level(sphere, c).components[0]
    av = action_vector(sphere, MomentValue(1.0, c), comp)
    assert av.I2 - c == pytest.approx(val / np.pi, rel=1e-9)


def test_action_homogeneity(two_bump, liouville):
    for m, c in ((two_bump, 0.3), (liouville, 1.0)):
        comp = classify_level(m, c).components[0]
        a1 = action_vector(m, MomentValue(1.0, c), comp)
        a3 = action_vector(m, MomentValue(3.0, 3.0 * c), comp)
        assert a3.I1 == pytest.approx(3 * a1.I1, rel=1e-10)
        assert a3.I2 == pytest.approx(3 * a1.I2, rel=1e-10)


def test_action_rejects_circle(sphere):
    comp = classify_level(sphere, 1.0).components[0]
    with pytest.raises(NotATorus):
        action_vector(sphere, MomentValue(1.0, 1.0), comp)


def test_equator_closes(sphere):
    z = PhasePoint("polar", (np.pi / 2, 0.0), (0.0, 1.0))
    tr = integrate_geodesic(sphere, z, T=2 * np.pi, dt=1e-3, record_every=100)
    rs = np.array([p.q[0] for p in tr.polar(sphere)])
    assert np.max(np.abs(rs - np.pi / 2)) < 1e-12
    end = tr.polar(sphere)[-1]
    # unit speed along the unit equator: theta advances exactly with time
    assert abs(np.angle(np.exp(1j * (end.q[1] - tr.times[-1])))) < 1e-6
    assert tr.times[-1] == pytest.approx(2 * np.pi, abs=1e-3)


def test_meridian_passes_poles(sphere):
    z = PhasePoint("polar", (np.pi / 2, 0.0), (1.0, 0.0))
    tr = integrate_geodesic(sphere, z, T=2 * np.pi, dt=1e-3, record_every=1)
    pol = tr.polar(sphere)
    rs = np.array([p.q[0] for p in pol])
    assert rs.min() < 2e-3 and rs.max() > np.pi - 2e-3
    assert tr.drift_p2 < 1e-14


def test_torus_flow_conserves(bourgain):
    z = PhasePoint("flat", (0.1, 0.2), (0.6, 0.4))
    tr = integrate_geodesic(bourgain, z, T=5.0, dt=1e-3)
    assert tr.drift_H < 1e-8 and tr.drift_p2 < 1e-8


def test_flat_density_constant(flat):
    cls = classify_level(flat, 0.3)
    comp = cls.components[0]
    g = Grid1D.periodic(64)
    f = pushforward_density(flat, comp, MomentValue(1.0, 0.3), g)
    assert np.allclose(f, 1.0 / flat.area, atol=1e-12)


def test_meridian_density_formula(sphere):
    comp = classify_level(sphere, 0.0).components[0]
    for r in (0.3, 1.0, 2.5):
        assert _density_at(sphere, comp, MomentValue(1.0, 0.0), r) == \
            pytest.approx(1 / (2 * np.pi**2 * np.sin(r)), rel=1e-12)


@pytest.mark.parametrize("c", [0.0, 0.5])
def test_density_against_trajectory_histogram(sphere, c):
    z = PhasePoint("polar", (np.pi / 2, 0.0), (np.sqrt(1 - c * c), c))
    tr = integrate_geodesic(sphere, z, T=2 * np.pi, dt=1e-3, record_every=1)
    edges = np.linspace(0, np.pi, 41)
    vol = 2 * np.pi * (np.cos(edges[:-1]) - np.cos(edges[1:]))
    hist_mass = histogram_density(sphere, tr, edges) * vol
    comp = classify_level(sphere, c).components[0]
    b = MomentValue(1.0, c)

    def mass(r):
        v = _density_at(sphere, comp, b, r)
        return 0.0 if np.isinf(v) else v * 2 * np.pi * np.sin(r)

    formula = np.array([quad(mass, lo, hi, limit=200)[0] for lo, hi in zip(edges[:-1], edges[1:])])
    assert np.sum(np.abs(hist_mass - formula)) <= 1e-2


def test_fold_divergence_location(sphere):
    comp = classify_level(sphere, 0.5).components[0]
    b = MomentValue(1.0, 0.5)
    r_minus = np.arcsin(0.5)
    assert np.isinf(_density_at(sphere, comp, b, r_minus))
    assert np.isinf(_density_at(sphere, comp, b, np.pi - r_minus))
    assert _density_at(sphere, comp, b, r_minus - 1e-3) == 0.0
    near = _density_at(sphere, comp, b, r_minus + 1e-8)
    mid = _density_at(sphere, comp, b, np.pi / 2)
    assert np.isfinite(near) and near > 100 * mid

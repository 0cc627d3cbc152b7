import numpy as np
import pytest

from llab.errors import InvalidParameter, WindowTooWide
from llab.grids import Grid1D
from llab.modes import (
    assemble_mode,
    clenshaw_curtis,
    liouville_constant_roots,
    solve_liouville,
    solve_surface_rev,
    solve_torus_rev,
)

from conftest import builtin
from oracles import liouville_tensor_eigenvalues, zonal_harmonic


def test_flat_sector_exponentials(flat):
    pairs = solve_torus_rev(flat, 1, 3)
    expected = 4 * np.pi**2 * np.array([1.0, 2.0, 2.0])
    assert np.allclose([p.lambda2 for p in pairs], expected, rtol=1e-12)


def test_flat_factors_are_pure_exponentials(flat):
    for p in solve_torus_rev(flat, 2, 5):
        x = np.linspace(0, 1, 50, endpoint=False)
        assert np.allclose(np.abs(p.evaluate(x)), 1.0, atol=1e-10)


def test_bourgain_grid_convergence(bourgain):
    coarse = solve_torus_rev(bourgain, 100, 1)[0].lambda2
    fine = solve_torus_rev(bourgain, 100, 1, grid=Grid1D.periodic(4096))[0].lambda2
    assert abs(coarse - fine) <= 1e-3 * fine
    # the spectral solver is far better than the stated tolerance
    assert abs(coarse - fine) <= 1e-9 * fine


def test_sphere_zonal(sphere):
    pairs = solve_surface_rev(sphere, 0, 5)
    for l, p in enumerate(pairs):
        assert p.lambda2 == pytest.approx(l * (l + 1), rel=1e-10, abs=1e-10)


def test_sphere_sector_five(sphere):
    pairs = solve_surface_rev(sphere, 5, 6)
    for k, p in enumerate(pairs):
        l = 5 + k
        assert p.lambda2 == pytest.approx(l * (l + 1), rel=1e-10)
        assert p.qnums == (5, k)


def test_sphere_normalisation(sphere):
    for p in solve_surface_rev(sphere, 3, 4):
        r, w = clenshaw_curtis(512, 0, np.pi)
        mass = np.sum(w * 2 * np.pi * np.sin(r) * np.abs(p.evaluate(r)) ** 2)
        assert mass == pytest.approx(1.0, abs=1e-10)


def test_grid_kind_checked(sphere, flat):
    with pytest.raises(InvalidParameter):
        solve_surface_rev(sphere, 0, 3, grid=Grid1D.periodic(256))
    with pytest.raises(InvalidParameter):
        solve_torus_rev(flat, 0, 3, grid=Grid1D.pole_regular(256, 1.0))
    with pytest.raises(InvalidParameter):
        solve_surface_rev(sphere, 0, 0)


def test_liouville_against_tensor_oracle(liouville):
    ref = liouville_tensor_eigenvalues(liouville.U1, liouville.U2, n=32, count=12)
    roots = solve_liouville(liouville, (-1.0, 0.5 * (ref[10] + ref[11])))
    got = np.array([r.lambda2 for r in roots])
    assert len(got) == 11
    assert np.allclose(got, ref[:11], rtol=1e-4, atol=1e-8)


def test_liouville_roots_stable_under_refinement(liouville):
    a = solve_liouville(liouville, (0, 60))
    b = solve_liouville(liouville, (0, 60), grid=Grid1D.periodic(512))
    assert [r.hill for r in a] == [r.hill for r in b]
    assert np.allclose([r.lambda2 for r in a], [r.lambda2 for r in b], rtol=1e-10)


def test_liouville_constant_closed_form():
    m = builtin("flat-liouville")
    roots = solve_liouville(m, (-1.0, 400.0))
    closed = []
    for lam2, s, k1, k2 in liouville_constant_roots(2.0, 1.0, 400.0):
        closed += [lam2] * ((1 if k1 == 0 else 2) * (1 if k2 == 0 else 2))
    assert len(roots) == len(closed)
    assert np.allclose([r.lambda2 for r in roots], sorted(closed), rtol=1e-10, atol=1e-10)


def test_liouville_residuals(liouville):
    for r in solve_liouville(liouville, (0, 40)):
        assert max(r.residuals) < 1e-8


def test_window_too_wide(liouville):
    with pytest.raises(WindowTooWide):
        solve_liouville(liouville, (0, 1e6))
    with pytest.raises(InvalidParameter):
        solve_liouville(liouville, (5, 1))


def test_assemble_flat_plane_wave(flat):
    p = solve_torus_rev(flat, 3, 3)[2]
    mode = assemble_mode(p, resolution=64)
    assert np.allclose(np.abs(mode.values), 1.0, atol=1e-10)
    assert mode.l2() == pytest.approx(1.0, abs=1e-12)


def test_assemble_zonal_l10(sphere):
    p = solve_surface_rev(sphere, 0, 11)[10]
    mode = assemble_mode(p, resolution=256, angular_resolution=8)
    ref = zonal_harmonic(10, mode.x)
    sign = np.sign(mode.values[0, 0].real)
    assert np.max(np.abs(sign * mode.values[:, 0] - ref)) <= 1e-6
    assert mode.l2() == pytest.approx(1.0, abs=1e-10)


@pytest.mark.parametrize("angular", ["exp", "cos", "sin"])
def test_assemble_sphere_norm(sphere, angular):
    p = solve_surface_rev(sphere, 4, 3)[1]
    mode = assemble_mode(p, resolution=128, angular=angular)
    assert mode.l2() == pytest.approx(1.0, abs=1e-10)


def test_assemble_liouville_constant():
    m = builtin("flat-liouville")
    roots = solve_liouville(m, (30.0, 45.0))
    for r in roots:
        mode = assemble_mode(r, resolution=64)
        assert mode.l2() == pytest.approx(1.0, abs=1e-10)
        # a product of two real trigonometric factors of one frequency each
        spec = np.abs(np.fft.fft2(mode.values))
        assert np.count_nonzero(spec > 1e-8 * spec.max()) <= 4


def test_assemble_liouville_generic_norm(liouville):
    for r in solve_liouville(liouville, (0, 30)):
        assert assemble_mode(r, resolution=128).l2() == pytest.approx(1.0, abs=1e-10)


def test_clenshaw_curtis_exactness():
    r, w = clenshaw_curtis(16, 0.0, 2.0)
    assert np.sum(w) == pytest.approx(2.0, abs=1e-14)
    assert np.sum(w * r**5) == pytest.approx(2.0**6 / 6, rel=1e-13)
    with pytest.raises(InvalidParameter):
        clenshaw_curtis(7, 0, 1)


def test_sector_orthogonality(bourgain):
    a = assemble_mode(solve_torus_rev(bourgain, 3, 1)[0], resolution=128)
    b = assemble_mode(solve_torus_rev(bourgain, 5, 1)[0], resolution=128)
    assert abs(np.sum(a.values * np.conj(b.values) * a.dV)) <= 1e-12


def test_flat_weyl_count(flat):
    lam_max = 4 * np.pi**2 * 30.5
    lattice = sum(1 for m in range(-6, 7) for n in range(-6, 7) if 4 * np.pi**2 * (m * m + n * n) <= lam_max)
    count = 0
    for N in range(0, 6):
        vals = [p.lambda2 for p in solve_torus_rev(flat, N, 15)]
        assert vals == sorted(vals)
        count += (1 if N == 0 else 2) * sum(v <= lam_max for v in vals)
    assert count == lattice


def test_liouville_product_solves_full_equation(liouville):
    # the separated pair must solve -Lap0 phi = lam2 (U1 - U2) phi on the torus
    n = 128
    x = np.arange(n) / n
    k = np.fft.fftfreq(n, 1.0 / n)
    lap = -(2 * np.pi) ** 2 * (k[:, None] ** 2 + k[None, :] ** 2)
    for r in solve_liouville(liouville, (0, 40))[:6]:
        phi = np.outer(r.eval_f(x), r.eval_g(x))
        lhs = -np.real(np.fft.ifft2(lap * np.fft.fft2(phi)))
        rhs = r.lambda2 * (liouville.U1(x)[:, None] - liouville.U2(x)[None, :]) * phi
        assert np.max(np.abs(lhs - rhs)) <= 1e-8 * max(1.0, np.max(np.abs(rhs)))


def test_sphere_product_solves_laplacian(two_bump):
    # Lap(e^{i m theta} phi) = a^{-1}(a phi')' - m^2 phi / a^2 in the metric dr^2 + a^2 dtheta^2
    a = two_bump.profile
    h = 1e-4
    r = np.linspace(0.3, np.pi - 0.3, 9)
    for m in (0, 3):
        for p in solve_surface_rev(two_bump, m, 3):
            f = p.evaluate
            flux = lambda s: a(s) * (f(s + h / 2) - f(s - h / 2)) / h
            lap = (flux(r + h / 2) - flux(r - h / 2)) / (h * a(r)) - m * m * f(r) / a(r) ** 2
            assert np.max(np.abs(lap + p.lambda2 * f(r))) <= 1e-4 * max(1.0, p.lambda2)

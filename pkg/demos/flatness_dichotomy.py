"""Sup norms of ground-sector modes: flat torus versus a bumped torus.

On the flat torus every mode is a plane wave of modulus one. On
a(x) = 1 - tau sin^2(pi x) the ground mode of each angular sector
concentrates on the maximal parallel and its sup norm grows like a
power of the eigenvalue. Run with ``python3 demos/flatness_dichotomy.py``.
"""

from llab.modes import assemble_mode, solve_torus_rev
from llab.quasimodes import compute_norms, norm_ladder, predict_exponents
from llab.surfaces import make_builtin


def ladder(model, sectors):
    rows = []
    for N in sectors:
        pair = solve_torus_rev(model, N, 1)[0]
        rows.append(compute_norms(assemble_mode(pair, resolution=512, angular_resolution=16)))
    return norm_ladder(rows, "eigenvalue")


if __name__ == "__main__":
    sectors = range(20, 201, 20)
    for name, sing in (("flat-torus", "none"), ("bourgain", "singular-leaf")):
        rep = ladder(make_builtin(name), sectors)
        pred = predict_exponents(sing)[0]["eigenvalue"]
        print(f"{name}:")
        for r in rep.rows:
            print(f"  lambda2 = {r.lambda2:14.3f}  sup = {r.sup:.6f}")
        slope, err = rep.fits["inf"]
        print(f"  fitted sup exponent {slope:.4f} +- {err:.1e}, predicted {pred}")

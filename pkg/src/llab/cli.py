"""``llab`` command line.

Exit codes: 0 success, 2 configuration error, 3 numerical-tolerance
failure, 4 cache error.
"""

from __future__ import annotations

import argparse
import sys

from . import __version__
from .errors import LlabError
from .runner import COMMANDS, run


def build_parser():
    ap = argparse.ArgumentParser(prog="llab", description="Modes and quasimodes of integrable "
                                 "geodesic flows on surfaces.")
    ap.add_argument("--version", action="version", version=f"llab {__version__}")
    ap.add_argument("command", choices=COMMANDS)
    ap.add_argument("--surface", help="surface-spec JSON file or builtin name")
    ap.add_argument("--c", type=float, help="level c = b2/b1")
    ap.add_argument("--m-range", help="angular numbers, a | a:b | a:b:step (inclusive)")
    ap.add_argument("--n-range", help="radial / mode indices, same syntax")
    ap.add_argument("--grid", type=int, help="1-D solver grid size")
    ap.add_argument("--resolution", type=int, help="sampling resolution of assembled modes")
    ap.add_argument("--p-list", help="comma-separated p values, 'inf' allowed")
    ap.add_argument("--window", help="eigenvalue window lo:hi (Liouville surfaces)")
    ap.add_argument("--angular", choices=("exp", "cos", "sin"), help="angular factor of modes")
    ap.add_argument("--convention", choices=("eigenvalue", "frequency"),
                    help="abscissa of exponent fits")
    ap.add_argument("--singularity", choices=("none", "fold", "singular-leaf", "blow-down"),
                    help="override the predicted-exponent class")
    ap.add_argument("--normalized-volume", action="store_true", help="norms on unit volume")
    ap.add_argument("--dump", action="store_true", help="write text dumps of sampled factors")
    ap.add_argument("--series", help="nf-demo input JSON")
    ap.add_argument("--runs", nargs="*", help="report: run keys to aggregate (default all)")
    ap.add_argument("--out", help="output directory (default $LLAB_OUT or ./llab-out)")
    ap.add_argument("--no-cache", action="store_true", help="recompute even if cached")
    return ap


def main(argv=None):
    args = build_parser().parse_args(argv)
    params = {k: v for k, v in vars(args).items() if k not in ("command", "out", "no_cache")}
    params = {k: v for k, v in params.items() if v is not None and v is not False}
    try:
        rec = run(args.command, params, out=args.out, use_cache=not args.no_cache)
    except LlabError as e:
        print(f"llab: {type(e).__name__}: {e}", file=sys.stderr)
        return e.exit_code
    state = "cached" if rec.cached else f"{rec.wall_time:.2f}s"
    print(f"{rec.key} {state}")
    for name in sorted(rec.outputs):
        print(f"  {rec.directory / name}")
    return 0


if __name__ == "__main__":
    sys.exit(main())

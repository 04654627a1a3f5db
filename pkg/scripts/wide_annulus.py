"""Annulus (1, 50) at p=3: a domain whose constant is below the convex value.

Runs the statements that need a minimiser (decay exponent, derivative formula
against finite differences) where they are not vacuous.  Expect several
minutes per solve on one core.
"""
import argparse

from hardyp import (RadialProblem, SolveConfig, build_domain, fit_decay_exponent,
                    hardy_derivative, membership_in_A, minimize_quotient, quotient_derivative,
                    radial_constant, solve_alpha, triangulate)
from hardyp.domain import Annulus


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--p", type=float, default=3.0)
    ap.add_argument("--h", type=float, default=2.0)
    ap.add_argument("--dp", type=float, default=0.05)
    ap.add_argument("--band", type=float, nargs=2, default=[1e-12, 1e-6],
                    help="distance band for the decay fit; the default band starts at h")
    args = ap.parse_args()
    p, outer = args.p, 50.0
    ref = radial_constant(RadialProblem(1.0, outer, 2, p, 1.0)).value
    mesh = triangulate(build_domain(Annulus(1.0, outer)), args.h, 2.0)
    cfg = SolveConfig(max_iterations=400)
    res = minimize_quotient(mesh, p, 1.0, cfg)
    print(f"radial {ref:.6f}  fem {res.value:.6f} ({100 * (res.value / ref - 1):+.2f}%)"
          f"  in_A {membership_in_A(res.value, p)}  iterations {res.iterations}", flush=True)
    if membership_in_A(res.value, p):
        fit = fit_decay_exponent(mesh, res.field, band=tuple(args.band))
        print(f"alpha {solve_alpha(res.value, p):.4f}  fitted {fit.alpha:.4f} (r2 {fit.r2:.3f})")
    warm = SolveConfig(max_iterations=400, init=res.field)
    fd = (minimize_quotient(mesh, p + args.dp, 1.0, warm).value
          - minimize_quotient(mesh, p - args.dp, 1.0, warm).value) / (2 * args.dp)
    print(f"dH/dp: finite difference {fd:.6g}"
          f"  formula {hardy_derivative(mesh, res.field, p, 1.0, res.value):.6g}"
          f"  envelope {quotient_derivative(mesh, res.field, p, 1.0, res.value):.6g}")


if __name__ == "__main__":
    main()

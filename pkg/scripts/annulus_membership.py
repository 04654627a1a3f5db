"""Radial Hardy constant of annuli (1, R) and whether it lies below the convex value.

Only annuli whose constant is strictly below ((p-1)/p)^p admit a minimiser and
a decay exponent; thin annuli sit at or numerically just above it.
"""
import argparse

from hardyp import RadialProblem, convex_value, membership_in_A, radial_constant, solve_alpha


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--outer", type=float, nargs="+", default=[1.5, 2, 5, 10, 20, 50, 100])
    ap.add_argument("--p", type=float, nargs="+", default=[1.5, 2.0, 3.0])
    args = ap.parse_args()
    print(f"{'R':>6} {'p':>5} {'H':>10} {'convex':>10} {'in A':>5} {'alpha':>8}")
    for R in args.outer:
        for p in args.p:
            H = radial_constant(RadialProblem(1.0, R, 2, p, 1.0)).value
            inside = membership_in_A(H, p)
            alpha = f"{solve_alpha(H, p):.4f}" if inside else "-"
            print(f"{R:6g} {p:5g} {H:10.6f} {convex_value(p):10.6f} {str(inside):>5} {alpha:>8}",
                  flush=True)


if __name__ == "__main__":
    main()

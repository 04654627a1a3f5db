"""Hardy constant of the unit square on a halving mesh ladder, compared with the convex value."""
import argparse
import time

from hardyp import build_domain, compute_constant, convex_value
from hardyp.domain import unit_square


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--p", type=float, nargs="+", default=[1.5, 2.0, 3.0])
    ap.add_argument("--ladder", type=float, nargs="+", default=[0.2, 0.1, 0.05])
    ap.add_argument("--grading", type=float, default=2.0)
    args = ap.parse_args()
    dom = build_domain(unit_square())
    print(f"{'p':>5} {'h':>6} {'H_h':>10} {'vs convex':>10}")
    for p in args.p:
        t0 = time.perf_counter()
        res = compute_constant(dom, p, 1.0, [(h, args.grading) for h in args.ladder])
        ref = convex_value(p)
        for h, v in zip(args.ladder, res.ladder_values):
            print(f"{p:5g} {h:6g} {v:10.6f} {100 * (v / ref - 1):+9.2f}%")
        print(f"      convex value {ref:.6f}; {time.perf_counter() - t0:.1f}s", flush=True)


if __name__ == "__main__":
    main()

"""Sweep p on a domain file and write the diagnostic table and summary."""
import argparse
from pathlib import Path

from hardyp import build_domain, load_spec, run_sweep
from hardyp.analysis import parse_grid


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("domain", help="domain spec JSON, e.g. scripts/domains/annulus.json")
    ap.add_argument("--grid", default="1.5:3.5:0.2")
    ap.add_argument("--h", type=float, default=0.25)
    ap.add_argument("--fd-step", type=float, default=0.05, help="0 skips the derivative check")
    ap.add_argument("--out", default="sweep_out")
    args = ap.parse_args()
    dom = build_domain(load_spec(args.domain))
    rep = run_sweep(dom, parse_grid(args.grid), 1.0, [(args.h, 2.0)], args.fd_step or None)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    stem = Path(args.domain).stem
    rep.to_csv(out / f"{stem}_sweep.csv")
    rep.write_summary(out / f"{stem}_sweep_summary.json")
    for row in rep.rows:
        print(f"p={row.p:<5g} H={row.H:.6f} in_A={row.in_A} transform={row.transform:.6f}")
    print(f"transform violations {len(rep.transform_violations())}, failed points {len(rep.failures)},"
          f" max continuity delta {rep.max_continuity_delta():.4g}")


if __name__ == "__main__":
    main()

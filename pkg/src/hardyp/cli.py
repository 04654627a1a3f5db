"""Command line entry point: ``hardyp {compute,sweep,oracle,verify}``.

Exit codes: 0 success, 2 invalid input, 3 solver failure, 4 acceptance failure.
"""
from __future__ import annotations

import argparse
import json
import os
import sys
from dataclasses import dataclass, field
from pathlib import Path

from .errors import (
    DomainError,
    HardyError,
    LadderNotMonotoneError,
    NonConvergenceError,
    ResolutionTooCoarseError,
)

EXIT_OK, EXIT_INVALID, EXIT_SOLVER, EXIT_ACCEPTANCE = 0, 2, 3, 4
OUT_ENV = "HARDYP_OUT"
COMMANDS = ("compute", "sweep", "oracle", "verify")


class ValidationError(ValueError):
    pass


@dataclass
class RunConfig:
    command: str
    domain: str | None = None
    p: float | None = None
    grid: list = field(default_factory=list)
    a: float = 1.0
    ladder: list = field(default_factory=list)
    grading: float = 2.0
    tol_gradient: float = 1e-4
    tol_value: float = 1e-10
    max_iterations: int = 1000
    fd_step: float | None = 0.05
    out: str = "hardyp_out"
    seed: int = 0
    init: str = "comparison"
    jobs: int = 1
    inner: float | None = None
    outer: float | None = None
    dim: int = 2

    def validate(self) -> None:
        def need(cond, msg):
            if not cond:
                raise ValidationError(msg)

        need(self.command in COMMANDS, f"command must be one of {COMMANDS}")
        need(0.0 <= self.a <= 1.0, "weight exponent a must lie in [0, 1]")
        if self.command in ("compute", "sweep"):
            need(self.domain is not None, "--domain is required")
            need(bool(self.ladder), "ladder must not be empty")
            need(all(h > 0 for h in self.ladder), "ladder h values must be positive")
            need(all(b < a for a, b in zip(self.ladder, self.ladder[1:])),
                 "ladder h values must be strictly decreasing")
            need(self.grading >= 1.0, "grading factor must be at least 1")
            need(self.tol_gradient > 0 and self.tol_value > 0, "tolerances must be positive")
            need(self.init in ("comparison", "random"), "init must be comparison or random")
        if self.command in ("compute", "oracle"):
            need(self.p is not None, "--p is required")
            need(self.p > 1, "p must exceed 1")
        if self.command == "sweep":
            need(bool(self.grid), "p grid must not be empty")
            need(all(p > 1 for p in self.grid), "p values must exceed 1")
            need(all(b > a for a, b in zip(self.grid, self.grid[1:])),
                 "p grid must be strictly increasing")
            need(self.jobs >= 1, "jobs must be at least 1")
            if self.fd_step is not None:
                need(self.fd_step > 0, "fd step must be positive")
                need(self.grid[0] - self.fd_step > 1, "p - fd step must exceed 1")
        if self.command == "oracle" and self.domain is None:
            need(self.inner is not None and self.outer is not None,
                 "oracle needs --domain or --inner/--outer")

    def solve_config(self):
        from .solver import SolveConfig

        return SolveConfig(tol_gradient=self.tol_gradient, tol_value=self.tol_value,
                           max_iterations=self.max_iterations, init=self.init, seed=self.seed)

    def mesh_ladder(self) -> list:
        return [(h, self.grading) for h in self.ladder]


def _floats(text: str) -> list:
    try:
        return [float(t) for t in text.split(",") if t.strip()]
    except ValueError as exc:
        raise ValidationError(f"bad number list {text!r}") from exc


def _grid(text: str) -> list:
    from .analysis import parse_grid

    try:
        return parse_grid(text)
    except ValueError as exc:
        raise ValidationError(str(exc)) from exc


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="hardyp", description="Hardy constants and p-Laplacian "
                                 "eigenvalues of planar domains by quotient minimisation.")
    sub = ap.add_subparsers(dest="command", required=True)

    def common(sp):
        sp.add_argument("--out", default=os.environ.get(OUT_ENV, "hardyp_out"),
                        help=f"output directory (default ${OUT_ENV} or ./hardyp_out)")

    def solver_flags(sp):
        sp.add_argument("--domain", required=True, help="domain spec JSON file")
        sp.add_argument("--a", type=float, default=1.0, help="weight exponent in [0, 1]")
        sp.add_argument("--ladder", default="0.2,0.1,0.05", help="comma list of decreasing h")
        sp.add_argument("--grading", type=float, default=2.0)
        sp.add_argument("--tol-gradient", type=float, default=1e-4)
        sp.add_argument("--tol-value", type=float, default=1e-10)
        sp.add_argument("--max-iterations", type=int, default=1000)
        sp.add_argument("--init", default="comparison", choices=("comparison", "random"))
        sp.add_argument("--seed", type=int, default=0)
        common(sp)

    c = sub.add_parser("compute", help="constant for one p on a mesh ladder")
    solver_flags(c)
    c.add_argument("--p", type=float, required=True)

    s = sub.add_parser("sweep", help="constant and diagnostics along a p grid")
    solver_flags(s)
    s.add_argument("--grid", required=True, help="start:stop:step (inclusive) or comma list")
    s.add_argument("--fd-step", type=float, default=0.05,
                   help="finite-difference step in p; 0 disables the extra solves")
    s.add_argument("--jobs", type=int, default=1)

    o = sub.add_parser("oracle", help="radial reference value on an annulus or interval")
    o.add_argument("--domain", help="annulus or interval spec JSON file")
    o.add_argument("--inner", type=float)
    o.add_argument("--outer", type=float)
    o.add_argument("--dim", type=int, default=2, help="ambient dimension of the radial problem")
    o.add_argument("--p", type=float, required=True)
    o.add_argument("--a", type=float, default=1.0)
    common(o)

    v = sub.add_parser("verify", help="run the acceptance suite and print a pass/fail table")
    common(v)
    return ap


def config_from_args(ns: argparse.Namespace) -> RunConfig:
    cfg = RunConfig(command=ns.command, out=ns.out)
    if ns.command in ("compute", "sweep"):
        cfg.domain, cfg.a, cfg.grading = ns.domain, ns.a, ns.grading
        cfg.ladder = _floats(ns.ladder)
        cfg.tol_gradient, cfg.tol_value = ns.tol_gradient, ns.tol_value
        cfg.max_iterations, cfg.init, cfg.seed = ns.max_iterations, ns.init, ns.seed
    if ns.command == "compute":
        cfg.p = ns.p
    if ns.command == "sweep":
        cfg.grid = _grid(ns.grid)
        cfg.fd_step = ns.fd_step if ns.fd_step else None
        cfg.jobs = ns.jobs
    if ns.command == "oracle":
        cfg.domain, cfg.inner, cfg.outer = ns.domain, ns.inner, ns.outer
        cfg.dim, cfg.p, cfg.a = ns.dim, ns.p, ns.a
    cfg.validate()
    return cfg


def _load_domain(path):
    from .domain import build_domain, load_spec

    try:
        return build_domain(load_spec(path))
    except (OSError, json.JSONDecodeError, KeyError, TypeError) as exc:
        raise ValidationError(f"cannot read domain spec {path}: {exc}") from exc


def _stem(path: str, p: float) -> str:
    return f"{Path(path).stem}_p{p:.12g}"


def _compute(cfg: RunConfig) -> int:
    from .solver import compute_constant, export_result

    dom = _load_domain(cfg.domain)
    res = compute_constant(dom, cfg.p, cfg.a, cfg.mesh_ladder(), cfg.solve_config())
    path = export_result(res, cfg.out, _stem(cfg.domain, cfg.p))
    print(json.dumps({"value": res.value, "ladder_values": res.ladder_values,
                      "record": str(path)}))
    return EXIT_OK


def _sweep(cfg: RunConfig) -> int:
    from .analysis import run_sweep
    from .solver import export_result

    dom = _load_domain(cfg.domain)
    results: list = []
    rep = run_sweep(dom, cfg.grid, cfg.a, cfg.mesh_ladder(), cfg.fd_step, cfg.solve_config(),
                    jobs=cfg.jobs, results_out=results)
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    stem = Path(cfg.domain).stem
    rep.to_csv(out / f"{stem}_sweep.csv")
    rep.write_summary(out / f"{stem}_sweep_summary.json")
    for res in results:
        export_result(res, out, _stem(cfg.domain, res.p))
    viol = rep.transform_violations()
    print(f"{len(rep.rows)} rows written to {out / f'{stem}_sweep.csv'};"
          f" transform violations: {len(viol)}; failed points: {len(rep.failures)}")
    for f in rep.failures:
        print(f"  p={f['p']:.12g}: {f['error']}", file=sys.stderr)
    return EXIT_SOLVER if rep.failures else EXIT_OK


def _oracle(cfg: RunConfig) -> int:
    from .domain import Annulus, Interval, load_spec
    from .oracle import RadialProblem, export_oracle, radial_constant

    if cfg.domain is not None:
        try:
            spec = load_spec(cfg.domain)
        except (OSError, json.JSONDecodeError, KeyError, TypeError, DomainError) as exc:
            raise ValidationError(f"cannot read domain spec {cfg.domain}: {exc}") from exc
        if isinstance(spec, Annulus):
            inner, outer, dim = spec.inner, spec.outer, cfg.dim
        elif isinstance(spec, Interval):
            inner, outer, dim = 0.0, spec.length, 1
        else:
            raise ValidationError("the radial oracle needs an annulus or an interval")
        stem = Path(cfg.domain).stem
    else:
        inner, outer, dim = cfg.inner, cfg.outer, cfg.dim
        stem = f"annulus_{inner:.12g}_{outer:.12g}"
    res = radial_constant(RadialProblem(inner, outer, dim, cfg.p, cfg.a))
    rec = res.record()
    rec.update(inner=inner, outer=outer, ambient_dim=dim)
    path = export_oracle(rec, Path(cfg.out) / f"{stem}_p{cfg.p:.12g}_oracle.json")
    print(json.dumps({"value": res.value, "record": str(path)}))
    return EXIT_OK


def _verify(cfg: RunConfig) -> int:
    from .acceptance import run_all

    results = run_all(stream=sys.stdout)
    failed = [r.number for r in results if not r.passed]
    print(f"{len(results) - len(failed)}/{len(results)} criteria passed"
          + (f"; failing: {failed}" if failed else ""))
    return EXIT_ACCEPTANCE if failed else EXIT_OK


def run(cfg: RunConfig) -> int:
    """Dispatch a validated config; errors are mapped to exit codes."""
    handlers = {"compute": _compute, "sweep": _sweep, "oracle": _oracle, "verify": _verify}
    try:
        cfg.validate()
        return handlers[cfg.command](cfg)
    except (NonConvergenceError, LadderNotMonotoneError) as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_SOLVER
    except (ValidationError, DomainError, ResolutionTooCoarseError, ValueError) as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except HardyError as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_SOLVER


def main(argv=None) -> int:
    parser = build_parser()
    try:
        ns = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_INVALID if exc.code else EXIT_OK
    try:
        cfg = config_from_args(ns)
    except ValidationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    return run(cfg)


if __name__ == "__main__":
    sys.exit(main())

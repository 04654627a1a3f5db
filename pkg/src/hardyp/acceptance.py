"""Acceptance suite: each criterion is a function returning a :class:`Criterion`.

Expensive fixtures (the square ladders, the annulus solves and the sweeps)
are computed once per process and shared between criteria.
"""
from __future__ import annotations

import time
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .analysis import (
    fit_decay_exponent,
    hardy_derivative,
    quotient_derivative,
    run_sweep,
    solve_alpha,
)
from .domain import Annulus, Interval, build_domain, regular_polygon, unit_square
from .errors import HardyError, NoRootError
from .mesh import triangulate
from .oracle import (
    Disk,
    IntervalShape,
    RadialProblem,
    classical_eigen_reference,
    convex_value,
    radial_constant,
)
from .solver import SolveConfig, compute_constant, minimize_quotient


@dataclass(frozen=True)
class Criterion:
    number: int
    name: str
    passed: bool
    detail: str

    def line(self) -> str:
        return f"[{'PASS' if self.passed else 'FAIL'}] {self.number:2d} {self.name}: {self.detail}"


P_CORE = (1.5, 2.0, 3.0)
SQUARE_LADDER = ((0.2, 2.0), (0.1, 2.0), (0.05, 2.0))
ANNULUS_MESH = (0.2, 2.0)
SWEEP_GRID = tuple(round(1.5 + 0.2 * k, 12) for k in range(11))
HALF_GRID = tuple(round(1.5 + 0.1 * k, 12) for k in range(21))
SWEEP_LADDER = ((0.25, 2.0),)
SQUARE_SWEEP_LADDER = ((0.2, 2.0),)
INTERVAL_CELLS = 512
RUNTIME_LIMIT = 120.0


def _rel(x: float, ref: float) -> float:
    return abs(x - ref) / abs(ref)


# ---------------------------------------------------------------------------
# shared fixtures


@lru_cache(maxsize=None)
def square_ladder(p: float):
    t0 = time.perf_counter()
    res = compute_constant(build_domain(unit_square()), p, 1.0, list(SQUARE_LADDER))
    return res, time.perf_counter() - t0


@lru_cache(maxsize=None)
def annulus_mesh():
    return triangulate(build_domain(Annulus(1.0, 2.0)), *ANNULUS_MESH)


@lru_cache(maxsize=None)
def annulus_solve(p: float):
    return minimize_quotient(annulus_mesh(), p, 1.0)


@lru_cache(maxsize=None)
def annulus_oracle(p: float) -> float:
    return radial_constant(RadialProblem(1.0, 2.0, 2, p, 1.0)).value


@lru_cache(maxsize=None)
def annulus_sweep():
    return run_sweep(build_domain(Annulus(1.0, 2.0)), SWEEP_GRID, 1.0, list(SWEEP_LADDER), 0.05)


@lru_cache(maxsize=None)
def annulus_half_sweep():
    return run_sweep(build_domain(Annulus(1.0, 2.0)), HALF_GRID, 1.0, list(SWEEP_LADDER), None)


@lru_cache(maxsize=None)
def square_sweep():
    return run_sweep(build_domain(unit_square()), SWEEP_GRID, 1.0, list(SQUARE_SWEEP_LADDER), None)


def interval_mesh_512():
    # 64 bulk cells of 1/64 and 224 halving layers per side
    mesh = triangulate(build_domain(Interval(1.0)), 1.0 / 64, 2.0, depth=2.0**-230)
    assert mesh.n_elements == INTERVAL_CELLS
    return mesh


# ---------------------------------------------------------------------------
# criteria


def c01_convex_square() -> Criterion:
    ok, parts = True, []
    for p in P_CORE:
        res, secs = square_ladder(p)
        ref = convex_value(p)
        lv = res.ladder_values
        mono = all(b <= a for a, b in zip(lv, lv[1:]))
        above = min(lv) >= ref - 1e-9
        close = _rel(res.value, ref) <= 0.05
        fast = secs <= RUNTIME_LIMIT
        ok &= mono and above and close and fast
        parts.append(f"p={p:g} H={res.value:.6f} ({100 * (res.value / ref - 1):+.2f}%)"
                     f" ladder {'non-increasing' if mono else 'RISES'} {secs:.0f}s")
    return Criterion(1, "convex square", ok, "; ".join(parts))


def c02_interval() -> Criterion:
    mesh = interval_mesh_512()
    ok, parts = True, []
    for p in P_CORE:
        v = minimize_quotient(mesh, p, 1.0).value
        e = _rel(v, convex_value(p))
        ok &= e <= 0.02
        parts.append(f"p={p:g} {100 * e:.2f}%")
    return Criterion(2, "interval exactness", ok, f"{mesh.n_elements} cells; " + "; ".join(parts))


def c03_oracle() -> Criterion:
    ok, parts = True, []
    for p in P_CORE:
        v, ref = annulus_solve(p).value, annulus_oracle(p)
        e = _rel(v, ref)
        ok &= e <= 0.02
        parts.append(f"p={p:g} fem {v:.6f} radial {ref:.6f} ({100 * e:.2f}%)")
    return Criterion(3, "radial oracle cross-check", ok, "; ".join(parts))


def c04_transform() -> Criterion:
    sq, an = square_sweep(), annulus_sweep()
    viol = len(sq.transform_violations()) + len(an.transform_violations())
    missing = len(sq.failures) + len(an.failures)
    ok = viol == 0 and missing == 0
    return Criterion(4, "monotone transform", ok,
                     f"{viol} violations over {len(sq.rows)} square + {len(an.rows)} annulus rows;"
                     f" {missing} failed points")


def c05_continuity() -> Criterion:
    coarse = annulus_sweep().max_continuity_delta()
    fine = annulus_half_sweep().max_continuity_delta()
    ok = fine <= 0.75 * coarse
    return Criterion(5, "continuity in p", ok,
                     f"max delta {coarse:.4g} (dp=0.2) -> {fine:.4g} (dp=0.1), ratio {fine / coarse:.3f}")


def c06_derivative() -> Criterion:
    rep = annulus_sweep()
    errs = rep.derivative_errors(only_in_A=True)
    every = rep.derivative_errors(only_in_A=False)
    worst_all = max((e for _, e in every), default=float("nan"))
    if not errs:
        return Criterion(6, "derivative formula", True,
                         "no sweep point has in_A (vacuous); outside A the formula/FD error"
                         f" reaches {100 * worst_all:.0f}%")
    worst = max(e for _, e in errs)
    return Criterion(6, "derivative formula", worst <= 0.05,
                     f"max error {100 * worst:.2f}% over {len(errs)} in_A points")


def c07_decay() -> Criterion:
    res = annulus_solve(2.0)
    fit = fit_decay_exponent(res.mesh, res.field)
    try:
        alpha = solve_alpha(res.value, 2.0)
    except NoRootError:
        return Criterion(7, "decay exponent", False,
                         f"H_2 = {res.value:.6f} exceeds 1/4, so no alpha root exists;"
                         f" fit alpha {fit.alpha:.4f}, r2 {fit.r2:.3f}")
    ok = _rel(fit.alpha, alpha) <= 0.10 and fit.r2 >= 0.98
    return Criterion(7, "decay exponent", ok,
                     f"fit {fit.alpha:.4f} vs alpha {alpha:.4f}, r2 {fit.r2:.3f}")


def c08_alpha_roundtrip(n: int = 100, seed: int = 0) -> Criterion:
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(n):
        p = float(rng.uniform(1.05, 6.0))
        lo = (p - 1.0) / p
        a_star = float(lo + (1.0 - lo) * rng.uniform(0.01, 0.99))
        H = (p - 1.0) * a_star ** (p - 1.0) * (1.0 - a_star)
        worst = max(worst, abs(solve_alpha(H, p) - a_star))
    return Criterion(8, "alpha round-trip", worst <= 1e-10, f"max error {worst:.2e} over {n} cases")


def c09_plaplacian() -> Criterion:
    line = triangulate(build_domain(Interval(1.0)), 1.0 / 256, 1.0)
    r = minimize_quotient(line, 2.0, 0.0)
    e_line = _rel(r.value, classical_eigen_reference(IntervalShape(1.0)))
    disk = triangulate(build_domain(regular_polygon(128, 1.0)), 0.05, 1.0)
    e_disk = _rel(minimize_quotient(disk, 2.0, 0.0).value, classical_eigen_reference(Disk(1.0)))
    dp = 0.05
    warm = SolveConfig(init=r.field)
    fd = (minimize_quotient(line, 2.0 + dp, 0.0, warm).value
          - minimize_quotient(line, 2.0 - dp, 0.0, warm).value) / (2 * dp)
    formula = hardy_derivative(line, r.field, 2.0, 0.0, r.value)
    envelope = quotient_derivative(line, r.field, 2.0, 0.0, r.value)
    e_der = _rel(formula, fd)
    ok = e_line <= 0.01 and e_disk <= 0.01 and e_der <= 0.05
    return Criterion(9, "p-Laplacian", ok,
                     f"interval {100 * e_line:.3f}%, disk {100 * e_disk:.3f}%;"
                     f" derivative formula {formula:.5g} vs FD {fd:.5g} ({100 * e_der:.1f}%),"
                     f" envelope derivative {envelope:.5g} ({100 * _rel(envelope, fd):.2f}%)")


def c10_corollary() -> Criterion:
    checks = square_sweep().corollary + annulus_sweep().corollary
    bad = [c["p"] for c in checks if not c["holds"]]
    return Criterion(10, "corollary inequality", not bad and bool(checks),
                     f"{len(checks) - len(bad)}/{len(checks)} minimizers satisfy it")


def c11_minimizer_continuity() -> Criterion:
    coarse = annulus_sweep().max_field_distance()
    fine = annulus_half_sweep().max_field_distance()
    ok = fine <= 0.75 * coarse
    return Criterion(11, "minimizer continuity", ok,
                     f"max distance {coarse:.4g} (dp=0.2) -> {fine:.4g} (dp=0.1), ratio {fine / coarse:.3f}")


CRITERIA = (c01_convex_square, c02_interval, c03_oracle, c04_transform, c05_continuity,
            c06_derivative, c07_decay, c08_alpha_roundtrip, c09_plaplacian, c10_corollary,
            c11_minimizer_continuity)


def evaluate(fn) -> Criterion:
    """Run one criterion; a library error counts as a failure with its message."""
    number = CRITERIA.index(fn) + 1
    try:
        return fn()
    except HardyError as exc:
        return Criterion(number, fn.__name__[4:].replace("_", " "), False,
                         f"{type(exc).__name__}: {exc}")


def run_all(stream=None) -> list:
    out = []
    for fn in CRITERIA:
        res = evaluate(fn)
        out.append(res)
        if stream is not None:
            print(res.line(), file=stream, flush=True)
    return out


"""Decay exponents, the p-derivative of the constant and p-sweeps."""
from __future__ import annotations

import csv
import json
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .domain import Domain, Polygon, build_domain, spec_from_dict, spec_to_dict
from .errors import BandTooThinError, HardyError, NoRootError, WrongWeightError
from .fem import Field, Mode, integrate_weighted
from .mesh import Mesh, triangulate
from .oracle import convex_value
from .solver import HardyResult, SolveConfig, solve_ladder

ROOT_SLACK = 1e-12


def _alpha_map(alpha: float, p: float) -> float:
    return (p - 1.0) * alpha ** (p - 1.0) * (1.0 - alpha)


def solve_alpha(H: float, p: float) -> float:
    """Largest root of ``(p-1) a^(p-1) (1-a) = H``, found on ``[(p-1)/p, 1]``.

    The left end is the maximiser of the map, with maximum ``((p-1)/p)^p``.
    """
    if not p > 1:
        raise ValueError("p must exceed 1")
    if not H > 0:
        raise ValueError("H must be positive")
    top = convex_value(p)
    if H > top + ROOT_SLACK:
        raise NoRootError(f"H={H:.12g} exceeds the maximum {top:.12g} at p={p:.12g}")
    lo, hi = (p - 1.0) / p, 1.0
    if H >= top:
        return lo
    # bisection to the last representable midpoint
    while True:
        mid = 0.5 * (lo + hi)
        if mid <= lo or mid >= hi:
            break
        if _alpha_map(mid, p) >= H:
            lo = mid
        else:
            hi = mid
    return lo if abs(_alpha_map(lo, p) - H) <= abs(_alpha_map(hi, p) - H) else hi


def membership_in_A(H: float, p: float, tol: float = 0.0) -> bool:
    """Whether ``H`` lies below the convex value by more than ``tol``."""
    return bool(H < convex_value(p) - tol)


def monotone_transform(p: float, H: float) -> float:
    return p * (1.0 + H ** (1.0 / p))


def _log_moments(mesh, field, p, a, H):
    if H is None:
        from .fem import evaluate_quotient

        H = evaluate_quotient(mesh, field, p, a).value
    glog = integrate_weighted(mesh, field, p, a, Mode.GRADIENT_POWER_LOG)
    wlog = integrate_weighted(mesh, field, p, a, Mode.WEIGHTED_POWER_LOG)
    den = integrate_weighted(mesh, field, p, a, Mode.WEIGHTED_POWER)
    return H, glog, wlog, den


def hardy_derivative(mesh: Mesh, field: Field, p: float, a: float,
                     H: float | None = None) -> float:
    """Derivative formula evaluated on a minimiser, free of its normalisation.

    ``[p int |grad u|^p ln|grad u| - p H int |u|^p/d^(ap) ln(|u|/d^a)] / int |u|^p/d^(ap)``.
    This is ``p`` times :func:`quotient_derivative`; the leading factor comes
    from differentiating ``s -> int f^s`` as ``s int f^s ln f``.
    """
    H, glog, wlog, den = _log_moments(mesh, field, p, a, H)
    return (p * glog - p * H * wlog) / den


def quotient_derivative(mesh: Mesh, field: Field, p: float, a: float,
                        H: float | None = None) -> float:
    """``d/dp`` of the quotient at fixed ``field``: ``(N' - H D') / D``.

    At the discrete minimiser this equals the derivative of the discrete
    minimum (envelope theorem), so it is what finite differences of the
    constant reproduce.
    """
    H, glog, wlog, den = _log_moments(mesh, field, p, a, H)
    return (glog - H * wlog) / den


@dataclass(frozen=True)
class DecayFit:
    alpha: float
    c: float
    r2: float
    n_points: int

    def __iter__(self):
        return iter((self.alpha, self.c, self.r2))


def _reentrant_corners(domain: Domain) -> np.ndarray:
    if not isinstance(domain.spec, Polygon):
        return np.zeros((0, 2))
    v = np.asarray(domain.spec.vertices)
    e_in = v - np.roll(v, 1, axis=0)
    e_out = np.roll(v, -1, axis=0) - v
    cross = e_in[:, 0] * e_out[:, 1] - e_in[:, 1] * e_out[:, 0]
    return v[cross < 0]


def fit_decay_exponent(mesh: Mesh, field: Field, band: tuple | None = None,
                       min_points: int = 20) -> DecayFit:
    """Least-squares slope of ``ln u`` against ``ln d`` near the boundary.

    Vertices with ``d`` in ``band`` (default ``[h, diameter/10]``) are used,
    except those whose nearest boundary point is a reentrant corner.
    """
    dom = mesh.domain
    lo, hi = band if band is not None else (mesh.h_target, dom.diameter / 10.0)
    d = mesh.distance
    u = field.coefficients
    keep = (d >= lo) & (d <= hi) & (u > 0)
    corners = _reentrant_corners(dom)
    if len(corners) and np.any(keep):
        pts = mesh.vertices
        dc = np.min(np.linalg.norm(pts[:, None, :] - corners[None], axis=-1), axis=1)
        keep &= dc > d * (1.0 + 1e-9)
    n = int(np.count_nonzero(keep))
    if n < min_points:
        raise BandTooThinError(f"only {n} vertices in the band [{lo:.3g}, {hi:.3g}]")
    x, y = np.log(d[keep]), np.log(u[keep])
    A = np.stack([x, np.ones_like(x)], axis=1)
    (slope, icpt), *_ = np.linalg.lstsq(A, y, rcond=None)
    resid = y - A @ np.array([slope, icpt])
    ss = float(np.sum((y - y.mean()) ** 2))
    r2 = 1.0 - float(np.sum(resid**2)) / ss if ss > 0 else 1.0
    return DecayFit(float(slope), float(math.exp(icpt)), r2, n)


@dataclass(frozen=True)
class CorollaryCheck:
    lhs: float
    rhs: float
    holds: bool

    def __iter__(self):
        return iter((self.lhs, self.rhs, self.holds))


def check_corollary_inequality(mesh: Mesh, field: Field, p: float, H: float,
                               a: float = 1.0, tol_ineq: float | None = None) -> CorollaryCheck:
    """``H int (u^p/d^p) ln(u/d) <= ((H + H^((p-1)/p))/p) int u^p/d^p + int |grad u|^p ln|grad u|``."""
    if a != 1:
        raise WrongWeightError("the inequality concerns the Hardy weight a = 1 only")
    wlog = integrate_weighted(mesh, field, p, 1.0, Mode.WEIGHTED_POWER_LOG)
    wp = integrate_weighted(mesh, field, p, 1.0, Mode.WEIGHTED_POWER)
    glog = integrate_weighted(mesh, field, p, 1.0, Mode.GRADIENT_POWER_LOG)
    lhs = H * wlog
    rhs = (H + H ** ((p - 1.0) / p)) / p * wp + glog
    tol = 1e-6 * abs(rhs) if tol_ineq is None else tol_ineq
    return CorollaryCheck(lhs, rhs, bool(lhs <= rhs + tol))


def field_distance(u: Field, v: Field, m: float) -> float:
    """Relative discrete ``W^{1,m}`` distance ``||u - v|| / ||u||``."""
    if u.mesh is not v.mesh:
        raise ValueError("fields must live on the same mesh")
    diff = Field(u.mesh, u.coefficients - v.coefficients)

    def norm(f):
        return (integrate_weighted(f.mesh, f, m, 0.0, Mode.GRADIENT_POWER)
                + integrate_weighted(f.mesh, f, m, 0.0, Mode.WEIGHTED_POWER)) ** (1.0 / m)

    return norm(diff) / norm(u)


# ---------------------------------------------------------------------------
# sweeps

COLUMNS = ("p", "H", "alpha", "transform", "dH_formula", "dH_fd", "in_A",
           "continuity_delta", "field_distance", "converged")


@dataclass
class SweepRow:
    p: float
    H: float
    alpha: float | None
    transform: float
    dH_formula: float
    dH_fd: float | None
    in_A: bool
    continuity_delta: float | None
    field_distance: float | None
    converged: bool


def _fmt(x) -> str:
    if x is None:
        return ""
    if isinstance(x, (bool, np.bool_)):
        return "true" if x else "false"
    return f"{float(x):.12g}"


def _parse(name: str, text: str):
    if text == "":
        return None
    if name in ("in_A", "converged"):
        if text not in ("true", "false"):
            raise ValueError(f"bad boolean {text!r} in column {name}")
        return text == "true"
    return float(text)


@dataclass
class SweepReport:
    rows: list
    grid: list
    domain: dict
    mesh_params: list
    a: float
    dp_fd: float | None
    failures: list = field(default_factory=list)
    corollary: list = field(default_factory=list)

    def column(self, name: str) -> np.ndarray:
        return np.array([np.nan if getattr(r, name) is None else float(getattr(r, name))
                         for r in self.rows])

    def transform_violations(self, tol: float = 1e-3) -> list:
        """Consecutive rows (in p order) where the transform drops by more than ``tol`` relative."""
        rows = sorted(self.rows, key=lambda r: r.p)
        return [(r0.p, r1.p) for r0, r1 in zip(rows, rows[1:])
                if r1.transform < r0.transform * (1.0 - tol)]

    def derivative_errors(self, only_in_A: bool = True) -> list:
        out = []
        for r in self.rows:
            if r.dH_fd is None or not r.converged or (only_in_A and not r.in_A):
                continue
            out.append((r.p, abs(r.dH_formula - r.dH_fd) / abs(r.dH_fd)))
        return out

    def max_continuity_delta(self) -> float:
        vals = [r.continuity_delta for r in self.rows if r.continuity_delta is not None]
        return max(vals) if vals else float("nan")

    def max_field_distance(self) -> float:
        vals = [r.field_distance for r in self.rows if r.field_distance is not None]
        return max(vals) if vals else float("nan")

    def summary(self) -> dict:
        errs = self.derivative_errors()
        return {
            "domain": self.domain, "a": self.a, "dp_fd": self.dp_fd,
            "mesh_params": self.mesh_params, "grid": self.grid,
            "rows": len(self.rows), "failures": self.failures,
            "transform_violations": self.transform_violations(),
            "max_continuity_delta": self.max_continuity_delta(),
            "max_field_distance": self.max_field_distance(),
            "max_derivative_error_in_A": max((e for _, e in errs), default=None),
            "in_A_count": sum(r.in_A for r in self.rows),
            "corollary": self.corollary,
        }

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(COLUMNS)
            for r in self.rows:
                w.writerow([_fmt(getattr(r, c)) for c in COLUMNS])

    def write_summary(self, path) -> None:
        Path(path).write_text(json.dumps(self.summary(), indent=2, sort_keys=True,
                                         default=_fmt) + "\n")


def read_sweep_csv(path) -> list:
    with open(path, newline="") as fh:
        rd = csv.reader(fh)
        header = next(rd)
        if tuple(header) != COLUMNS:
            raise ValueError(f"unexpected header {header}")
        return [SweepRow(**{c: _parse(c, t) for c, t in zip(COLUMNS, line)}) for line in rd]


def _build_meshes(domain: Domain, ladder) -> list:
    from .solver import _level

    return [triangulate(domain, *_level(e)) for e in ladder]


@dataclass
class _PointResult:
    p: float
    result: HardyResult | None
    minus: float | None
    plus: float | None
    error: str | None = None


def _solve_point(meshes, p, a, config, dp_fd, init):
    res = solve_ladder(meshes, p, a, config, init=init)
    lo = hi = None
    if dp_fd:
        fine = meshes[-1:]
        lo = solve_ladder(fine, p - dp_fd, a, config, init=res.field).value
        hi = solve_ladder(fine, p + dp_fd, a, config, init=res.field).value
    return res, lo, hi


def _cold_job(args):
    spec, ladder, p, a, config, dp_fd = args
    meshes = _build_meshes(build_domain(spec_from_dict(spec)), ladder)
    try:
        res, lo, hi = _solve_point(meshes, p, a, config, dp_fd, None)
    except HardyError as exc:
        return p, None, None, None, f"{type(exc).__name__}: {exc}"
    return p, res, lo, hi, None


def run_sweep(domain: Domain, p_grid: Sequence[float], a: float, ladder: Sequence,
              dp_fd: float | None = 0.05, config: SolveConfig | None = None,
              jobs: int = 1, results_out: list | None = None) -> SweepReport:
    """Solve along ``p_grid`` and tabulate the constant and its diagnostics.

    With ``jobs == 1`` the points form a warm-start chain on shared meshes;
    with more jobs they are solved cold in separate processes.  Failed
    points are listed in ``failures`` and left out of the rows.
    """
    grid = [float(p) for p in p_grid]
    if not grid or any(p <= 1 for p in grid):
        raise ValueError("p values must exceed 1")
    if any(q <= p for p, q in zip(grid, grid[1:])):
        raise ValueError("p grid must be strictly increasing")
    if dp_fd is not None:
        spacing = min((q - p for p, q in zip(grid, grid[1:])), default=math.inf)
        if not 0 < dp_fd <= spacing + 1e-12:
            raise ValueError("dp_fd must be positive and at most the grid spacing")
        if grid[0] - dp_fd <= 1:
            raise ValueError("p - dp_fd must exceed 1")
    config = config or SolveConfig()
    meshes = _build_meshes(domain, ladder)
    points: list[_PointResult] = []
    if jobs > 1:
        args = [(spec_to_dict(domain.spec), list(ladder), p, a, config, dp_fd) for p in grid]
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            for p, res, lo, hi, err in pool.map(_cold_job, args):
                if res is not None:
                    # re-home the field on the local mesh so fields can be compared
                    res.field = Field(meshes[-1], res.field.coefficients)
                points.append(_PointResult(p, res, lo, hi, err))
    else:
        init = None
        for p in grid:
            try:
                res, lo, hi = _solve_point(meshes, p, a, config, dp_fd, init)
            except HardyError as exc:
                points.append(_PointResult(p, None, None, None, f"{type(exc).__name__}: {exc}"))
                continue
            points.append(_PointResult(p, res, lo, hi))
            init = res.field
    rows, failures, corollary = [], [], []
    prev = None
    for pt in points:
        if pt.result is None:
            failures.append({"p": pt.p, "error": pt.error})
            prev = None
            continue
        res = pt.result
        H, p = res.value, pt.p
        try:
            alpha = solve_alpha(H, p) if a == 1 else None
        except NoRootError:
            alpha = None
        mesh = res.mesh
        dH = hardy_derivative(mesh, res.field, p, a, H)
        dfd = (pt.plus - pt.minus) / (2 * dp_fd) if dp_fd else None
        in_a = membership_in_A(H, p, res.slack) if a == 1 else False
        cdelta = fdist = None
        if prev is not None:
            cdelta = abs(H - prev.result.value)
            fdist = field_distance(res.field, prev.result.field, max(p, prev.p))
        rows.append(SweepRow(p, H, alpha, monotone_transform(p, H), dH, dfd, in_a,
                             cdelta, fdist, res.converged))
        if a == 1:
            chk = check_corollary_inequality(mesh, res.field, p, H)
            corollary.append({"p": p, "lhs": chk.lhs, "rhs": chk.rhs, "holds": chk.holds})
        if results_out is not None:
            results_out.append(res)
        prev = pt
    return SweepReport(rows, grid, spec_to_dict(domain.spec), [list(map(_fmt_level, ladder))],
                       a, dp_fd, failures, corollary)


def _fmt_level(entry):
    return entry if isinstance(entry, (int, float)) else list(entry)


def parse_grid(text: str) -> list:
    """``start:stop:step``, inclusive of ``stop`` within 1e-12, or a comma list."""
    if ":" not in text:
        return [float(t) for t in text.split(",") if t.strip()]
    parts = [float(t) for t in text.split(":")]
    if len(parts) != 3:
        raise ValueError("grid must be start:stop:step")
    start, stop, step = parts
    if not step > 0 or stop < start:
        raise ValueError("grid needs step > 0 and stop >= start")
    n = int(math.floor((stop - start) / step + 1e-12 / step)) + 1
    vals = [start + k * step for k in range(n)]
    if abs(vals[-1] - stop) <= 1e-12:
        vals[-1] = stop
    return [round(v, 12) for v in vals]

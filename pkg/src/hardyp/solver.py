"""Discrete minimisation of the weighted Rayleigh quotient.

The descent direction is the quotient gradient preconditioned by the shifted
linearised operator ``K - sigma M`` (a Sobolev gradient), with sigma just
below the current quotient.  Each step is accepted through Armijo
backtracking, followed by ``u <- |u|`` and renormalisation to
``int |u|^p / d^(a p) = 1``; the quotient is invariant under both, so the
logged values decrease strictly.
"""
from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Any, Sequence

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as sla

from .domain import Domain, is_convex
from .errors import (
    DegenerateFieldError,
    LadderNotMonotoneError,
    NonConvergenceError,
    NoRootError,
)
from .fem import DEFAULT_ORDER, Field, export_field, linearized_operators, quotient_state
from .mesh import Mesh, triangulate


@dataclass
class SolveConfig:
    tol_gradient: float = 1e-4   # on the relative preconditioned gradient norm
    tol_value: float = 1e-10     # on the relative decrease per iteration
    max_iterations: int = 1000
    init: Any = "comparison"     # "comparison", "random", a Field or an array
    seed: int = 0
    min_shift_gap: float = 1e-10
    max_shift_gap: float = 1e-2
    armijo: float = 1e-4
    backtrack: float = 0.5
    order: int = DEFAULT_ORDER
    callback: Any = None         # called with each IterationRecord

    def __post_init__(self):
        if not (self.tol_gradient > 0 and self.tol_value > 0):
            raise ValueError("tolerances must be positive")
        if self.max_iterations < 1:
            raise ValueError("max_iterations must be at least 1")
        if not 0 < self.min_shift_gap <= self.max_shift_gap < 1:
            raise ValueError("need 0 < min_shift_gap <= max_shift_gap < 1")


@dataclass
class IterationRecord:
    iteration: int
    value: float
    residual: float
    step_size: float


@dataclass
class HardyResult:
    p: float
    a: float
    value: float
    alpha: float | None
    field: Field
    iterations: int
    residual: float
    h: float
    grading_factor: float
    domain_convex: bool
    converged: bool = True
    gradient_max: float = float("nan")
    history: list = field(default_factory=list, repr=False)
    ladder_values: list = field(default_factory=list)
    slack: float = 0.0
    smoothness: str = "lipschitz"
    depth: float = 0.0
    source: str = "fem"

    @property
    def mesh(self) -> Mesh:
        return self.field.mesh

    @property
    def infimum_attained_expected(self) -> bool:
        return not self.domain_convex

    def record(self) -> dict:
        keys = ("p", "a", "value", "alpha", "iterations", "residual", "h",
                "grading_factor", "depth", "domain_convex", "converged", "gradient_max",
                "slack", "smoothness", "source")
        out = {k: getattr(self, k) for k in keys}
        out["infimum_attained_expected"] = self.infimum_attained_expected
        out["ladder_values"] = list(self.ladder_values)
        return out


# ---------------------------------------------------------------------------
# initial fields


def comparison_function(mesh: Mesh, alpha: float) -> np.ndarray:
    """``d^alpha (1 - d/diameter)``, positive inside and zero on the boundary."""
    d = mesh.distance
    u = d**alpha * (1.0 - d / mesh.domain.diameter)
    u[mesh.boundary] = 0.0
    return u


def default_alpha(p: float, a: float) -> float:
    # (p-1)/p for the Hardy weight, 1 for the unweighted eigenproblem
    return 1.0 - a / p


def transfer(field: Field, mesh: Mesh, beta: float = 0.5) -> np.ndarray:
    """Interpolate ``field`` onto the vertices of another mesh of the same domain.

    Identical meshes copy the coefficients.  Otherwise ``u / d^beta`` (close
    to constant near the boundary) is interpolated linearly from the source
    vertices that are not deep inside the boundary layers, then multiplied
    back by the new distances.  ``beta`` should match the expected boundary
    decay: layers deeper than the source's are filled with ``d^beta``.
    """
    src = field.mesh
    if src is mesh or (src.n_vertices == mesh.n_vertices
                       and np.array_equal(src.vertices, mesh.vertices)
                       and np.array_equal(src.elements, mesh.elements)):
        return np.array(field.coefficients)
    diam = mesh.domain.diameter
    keep = (src.distance > 1e-6 * diam)
    w = field.coefficients[keep] / src.distance[keep] ** beta
    if mesh.dim == 1:
        x = src.vertices[keep, 0]
        out = np.interp(mesh.vertices[:, 0], x, w)
    else:
        from scipy.interpolate import LinearNDInterpolator, NearestNDInterpolator

        pts = src.vertices[keep]
        out = LinearNDInterpolator(pts, w)(mesh.vertices)
        miss = ~np.isfinite(out)
        if np.any(miss):
            out[miss] = NearestNDInterpolator(pts, w)(mesh.vertices[miss])
    out = np.abs(out) * mesh.distance**beta
    out[mesh.boundary] = 0.0
    return out


def initial_coefficients(mesh: Mesh, p: float, a: float, config: SolveConfig) -> np.ndarray:
    init = config.init
    if isinstance(init, Field):
        u = transfer(init, mesh, default_alpha(p, a))
    elif isinstance(init, np.ndarray):
        u = np.abs(np.asarray(init, dtype=float).copy())
    elif init == "random":
        # i.i.d. vertex factors on the comparison envelope: O(1) values on
        # layers 1e-30 thin would put the quotient near 1e90
        rng = np.random.default_rng(config.seed)
        u = comparison_function(mesh, default_alpha(p, a)) * rng.uniform(0.1, 1.0, mesh.n_vertices)
    elif init == "comparison":
        u = comparison_function(mesh, default_alpha(p, a))
    else:
        raise ValueError(f"unknown init {init!r}")
    u[mesh.boundary] = 0.0
    if not np.any(u > 0):
        raise DegenerateFieldError("initial field vanishes")
    return u


# ---------------------------------------------------------------------------
# the descent


SHIFT_FACTOR = 1e-2


def shift_candidates(R: float, residual: float, min_gap: float = 1e-10,
                     max_gap: float = 1e-2):
    """Shifts for ``K - sigma M``, closest to the quotient first.

    The relative gap shrinks with the residual, so the step approaches a
    shifted inverse iteration as the iterate converges; the smaller shifts
    are fallbacks when the shifted operator is indefinite.
    """
    if not math.isfinite(residual):
        return (R * (1.0 - max_gap), R * (1.0 - 10.0 * max_gap), 0.5 * R, 0.0)
    # a gap equal to the residual stalls when the two lowest modes are
    # closer than it; a hundredth of it stays well ahead of them
    gap = min(max_gap, max(min_gap, SHIFT_FACTOR * residual))
    return (R * (1.0 - gap), R * (1.0 - 10.0 * gap), 0.5 * R, 0.0)


def _scaled_solve(A, rhs: np.ndarray):
    """Solve ``A z = rhs`` and count the negative eigenvalues of ``A``.

    ``A`` is scaled symmetrically to unit diagonal first (entries span up to
    ~1e60 on deep layers).  The LU uses symmetric ordering with diagonal
    pivots, so by Sylvester's law the signs of ``diag(U)`` give the inertia.
    """
    diag = np.abs(A.diagonal())
    s = 1.0 / np.sqrt(np.where(diag > 0, diag, 1.0))
    S = sp.diags(s)
    lu = sla.splu((S @ A @ S).tocsc(), permc_spec="MMD_AT_PLUS_A", diag_pivot_thresh=0.0,
                  options=dict(SymmetricMode=True))
    negative = int(np.count_nonzero(lu.U.diagonal() < 0))
    return s * lu.solve(s * rhs), negative


def _normalised_state(mesh, u, p, a, order, with_gradient=True):
    st = quotient_state(mesh, u, p, a, order, with_gradient=False)
    u = u / st.denominator ** (1.0 / p)
    return u, quotient_state(mesh, u, p, a, order, with_gradient=with_gradient)


def minimize_quotient(mesh: Mesh, p: float, a: float,
                      config: SolveConfig | None = None) -> HardyResult:
    """Minimise the quotient over nonnegative P1 fields on ``mesh``."""
    if not p > 1:
        raise ValueError("p must exceed 1")
    if not 0 <= a <= 1:
        raise ValueError("a must lie in [0, 1]")
    config = config or SolveConfig()
    order = config.order
    free = mesh.free
    u = initial_coefficients(mesh, p, a, config)
    u, st = _normalised_state(mesh, u, p, a, order)
    R = st.value
    history = [IterationRecord(0, R, float("nan"), 0.0)]
    t = 1.0
    change = float("inf")
    residual = float("inf")
    converged = False
    it = 0
    for it in range(1, config.max_iterations + 1):
        g = st.gradient[free]
        K, M = linearized_operators(mesh, u, p, a, order, state=st)
        z, gz = None, -1.0
        for sigma in shift_candidates(R, residual, config.min_shift_gap, config.max_shift_gap):
            try:
                zc, negative = _scaled_solve(K - sigma * M, g)
            except RuntimeError:
                continue
            gzc = float(g @ zc)
            # one negative mode is the shifted-inverse-iteration regime;
            # more mean sigma sits inside the spectrum and z is dominated by
            # arbitrary modes near sigma
            if negative <= 1 and np.all(np.isfinite(zc)) and gzc > 0:
                z, gz = zc, gzc
                break
        if z is None:
            # only round-off is left in g . z
            converged = not np.any(g) or residual <= 100 * config.tol_gradient
            if not np.any(g):
                residual = 0.0
            it -= 1
            break
        residual = math.sqrt(gz) / R
        if residual <= config.tol_gradient and change <= config.tol_value:
            converged = True
            it -= 1
            break
        direction = np.zeros_like(u)
        direction[free] = -z
        t = min(1.0, 2.0 * t)
        accepted = False
        while t > 1e-14:
            cand = np.abs(u + t * direction)
            cand[mesh.boundary] = 0.0
            if np.any(cand > 0):
                cand, cst = _normalised_state(mesh, cand, p, a, order, with_gradient=False)
                if cst.value <= R - config.armijo * t * gz:
                    accepted = True
                    break
            t *= config.backtrack
        if not accepted:
            # no representable decrease left: the iterate sits at round-off level
            converged = residual <= 100 * config.tol_gradient
            it -= 1
            break
        u = cand
        st = quotient_state(mesh, u, p, a, order)
        change = (R - st.value) / st.value
        R = st.value
        history.append(IterationRecord(it, R, residual, t))
        if config.callback is not None:
            config.callback(history[-1])
    else:
        raise NonConvergenceError(config.max_iterations, residual)
    if not converged:
        raise NonConvergenceError(it, residual, "line search stalled above tolerance")
    fld = Field(mesh, u)
    return HardyResult(
        p=p, a=a, value=R, alpha=None, field=fld, iterations=len(history) - 1,
        residual=residual, h=mesh.h_target, grading_factor=mesh.grading_factor,
        domain_convex=is_convex(mesh.domain), converged=converged,
        gradient_max=float(np.max(np.abs(st.gradient))), history=history,
        smoothness=mesh.domain.smoothness, depth=mesh.depth)


def _level(entry):
    if isinstance(entry, (int, float)):
        return float(entry), 2.0, None
    entry = tuple(entry)
    return float(entry[0]), float(entry[1]) if len(entry) > 1 else 2.0, (
        float(entry[2]) if len(entry) > 2 and entry[2] is not None else None)


def solve_ladder(meshes: Sequence[Mesh], p: float, a: float,
                 config: SolveConfig | None = None, init: Field | None = None,
                 tol: float = 1e-6) -> HardyResult:
    """Solve on prebuilt meshes, coarse to fine, each level warm-started."""
    from .analysis import solve_alpha

    if not meshes:
        raise ValueError("ladder must not be empty")
    config = config or SolveConfig()
    values, result = [], None
    prev = init
    for mesh in meshes:
        cfg = config if prev is None else replace(config, init=prev)
        result = minimize_quotient(mesh, p, a, cfg)
        values.append(result.value)
        prev = result.field
    if any(v2 > v1 + tol for v1, v2 in zip(values, values[1:])):
        raise LadderNotMonotoneError(values)
    result.ladder_values = values
    result.slack = abs(values[-1] - values[-2]) if len(values) > 1 else 0.0
    if a == 1:
        try:
            result.alpha = solve_alpha(result.value, p)
        except NoRootError:
            result.alpha = None
    return result


def compute_constant(domain: Domain, p: float, a: float, ladder: Sequence,
                     config: SolveConfig | None = None, tol: float = 1e-6,
                     init: Field | None = None) -> HardyResult:
    """Solve on a sequence of meshes, warm-starting each from the previous one.

    ``ladder`` holds ``(h, grading_factor[, depth])`` entries (or bare ``h``)
    with strictly decreasing ``h``.  The finest result is returned together
    with the per-level values; for ``a = 1`` ``alpha`` is filled in when the
    value admits a root (it is left ``None`` above the convex value).
    """
    levels = [_level(e) for e in ladder]
    if not levels:
        raise ValueError("ladder must not be empty")
    hs = [lv[0] for lv in levels]
    if any(h2 >= h1 for h1, h2 in zip(hs, hs[1:])):
        raise ValueError("ladder h values must be strictly decreasing")
    meshes = [triangulate(domain, *lv) for lv in levels]
    return solve_ladder(meshes, p, a, config, init, tol)


# ---------------------------------------------------------------------------
# export


def _jsonable(x):
    if isinstance(x, (np.floating, np.integer)):
        return x.item()
    if isinstance(x, float) and not math.isfinite(x):
        return str(x)
    return x


def export_result(result: HardyResult, directory, stem: str = "result") -> Path:
    """Write ``<stem>.json`` (scalars), ``<stem>.field`` and ``<stem>_log.csv``."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    rec = {k: _jsonable(v) for k, v in result.record().items()}
    rec["ladder_values"] = [_jsonable(v) for v in rec["ladder_values"]]
    rec["field_file"] = f"{stem}.field"
    export_field(result.field, directory / f"{stem}.field", result.p, result.a, result.value)
    write_iteration_log(result.history, directory / f"{stem}_log.csv")
    path = directory / f"{stem}.json"
    path.write_text(json.dumps(rec, indent=2, sort_keys=True) + "\n")
    return path


def write_iteration_log(history, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["iteration", "value", "residual", "step_size"])
        for r in history:
            w.writerow([r.iteration, f"{r.value:.12g}", f"{r.residual:.12g}",
                        f"{r.step_size:.12g}"])

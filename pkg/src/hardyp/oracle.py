"""Reference values that do not depend on the 2-D finite element code.

Radial reduction
----------------
For ``u(x) = v(|x|)`` on the annulus ``inner < |x| < outer`` in ``R^n`` one
has ``|grad u| = |v'(r)|``, ``d(x) = min(r - inner, outer - r)`` and
``dx = |S^{n-1}| r^{n-1} dr``.  The sphere area cancels in the quotient, so

    R[u] = int |v'|^p r^{n-1} dr / int |v|^p d^(-a p) r^{n-1} dr.

Radial fields form a subspace, hence the radial infimum bounds the full one
from above.  With ``n = 1`` the weight disappears and the problem is the
one on the interval ``]0, outer - inner[``.

The radial problem is discretised by its own P1 code below on a grid that is
geometric towards both radii.  Node positions are kept as offsets from the
nearer radius so that layers far below machine epsilon relative to the radii
keep their exact distance.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.linalg import solve_banded

from .errors import NonConvergenceError

_GAUSS = np.polynomial.legendre.leggauss(6)
_XI = 0.5 * (_GAUSS[0] + 1.0)
_W = 0.5 * _GAUSS[1]


def convex_value(p: float) -> float:
    """Hardy constant of every convex domain, ``((p-1)/p)^p``."""
    if not p > 1:
        raise ValueError("p must exceed 1")
    return ((p - 1.0) / p) ** p


# ---------------------------------------------------------------------------
# radial grid


@dataclass(frozen=True)
class RadialGrid:
    offsets: np.ndarray   # distance of each node to the nearer radius
    widths: np.ndarray    # exact width of each cell
    side: np.ndarray      # per cell: 0 nearer the inner radius, 1 nearer the outer
    inner: float
    outer: float

    @property
    def radii(self) -> np.ndarray:
        n = len(self.offsets)
        half = n // 2
        r = np.empty(n)
        r[: half + 1] = self.inner + self.offsets[: half + 1]
        r[half + 1:] = self.outer - self.offsets[half + 1:]
        r[0], r[-1] = self.inner, self.outer
        return r

    @property
    def size(self) -> int:
        return len(self.offsets)


def radial_grid(inner: float, outer: float, cells_per_side: int = 64,
                ratio: float = 1.25, depth: float = 1e-50) -> RadialGrid:
    """Symmetric grid: ``cells_per_side`` uniform cells per half plus geometric layers.

    ``depth`` is the thinnest layer relative to the width ``outer - inner``.
    """
    T = outer - inner
    half = 0.5 * T
    h = half / cells_per_side
    layers = []
    x = h
    while x / ratio > depth * T:
        x /= ratio
        layers.append(x)
    # node offsets from the nearer radius: 0, layers (ascending), then uniform
    lay = np.array(layers[::-1])
    uniform = h * np.arange(1, cells_per_side + 1)
    nodes_half = np.concatenate([[0.0], lay, uniform])
    w_half = np.diff(nodes_half)
    w_half[0] = lay[0] if len(lay) else h
    nodes = np.concatenate([nodes_half, nodes_half[-2::-1]])
    widths = np.concatenate([w_half, w_half[::-1]])
    side = np.concatenate([np.zeros(len(w_half), int), np.ones(len(w_half), int)])
    return RadialGrid(nodes, widths, side, float(inner), float(outer))


@dataclass(frozen=True)
class RadialProblem:
    inner: float
    outer: float
    ambient_dim: int = 2
    p: float = 2.0
    a: float = 1.0
    grid: RadialGrid | None = None

    def __post_init__(self):
        if not 0 <= self.inner < self.outer:
            raise ValueError("need 0 <= inner < outer")
        if self.ambient_dim < 1:
            raise ValueError("ambient_dim must be positive")
        if not self.p > 1 or not 0 <= self.a <= 1:
            raise ValueError("need p > 1 and a in [0, 1]")
        g = self.grid if self.grid is not None else radial_grid(self.inner, self.outer)
        if g.size < 64 or g.inner != self.inner or g.outer != self.outer:
            raise ValueError("grid must span [inner, outer] with at least 64 nodes")
        object.__setattr__(self, "grid", g)


@dataclass
class RadialResult:
    value: float
    radii: np.ndarray
    profile: np.ndarray
    iterations: int
    p: float
    a: float
    history: list = field(default_factory=list, repr=False)

    def record(self) -> dict:
        return {"p": self.p, "a": self.a, "value": self.value, "iterations": self.iterations,
                "nodes": int(len(self.radii)), "source": "oracle"}


# ---------------------------------------------------------------------------
# radial discretisation


def _curvature(p: float) -> float:
    # secant weight p |t|^(p-2) below p = 2, Hessian weight above
    return p * max(p - 1.0, 1.0)


class _Radial:
    def __init__(self, prob: RadialProblem):
        g = prob.grid
        self.p, self.a = prob.p, prob.a
        self.w = g.widths
        n = prob.ambient_dim
        # offsets at the quadrature points of each cell
        lo, hi = g.offsets[:-1], g.offsets[1:]
        self.dq = lo[:, None] * (1 - _XI) + hi[:, None] * _XI
        r_in = g.inner + self.dq
        r_out = g.outer - self.dq
        r = np.where(g.side[:, None] == 0, r_in, r_out)
        self.wq = _W * self.w[:, None] * r ** (n - 1)      # measure per point
        self.we = self.wq.sum(axis=1)
        self.da = self.dq ** self.a if self.a else np.ones_like(self.dq)
        self.N = len(g.offsets)

    def state(self, u):
        p = self.p
        s = np.diff(u) / self.w
        uq = u[:-1, None] * (1 - _XI) + u[1:, None] * _XI
        ratio = np.abs(uq) / self.da
        N = float(np.sum(self.we * np.abs(s) ** p))
        D = float(np.sum(self.wq * ratio**p))
        return N, D, s, uq, ratio

    def gradient(self, u, N, D, s, uq, ratio):
        p = self.p
        R = N / D
        gs = self.we * p * np.abs(s) ** (p - 1) * np.sign(s) / self.w
        gN = np.zeros(self.N)
        gN[:-1] -= gs
        gN[1:] += gs
        f = self.wq * p * ratio ** (p - 1) * np.sign(uq) / self.da
        gD = np.zeros(self.N)
        gD[:-1] += np.sum(f * (1 - _XI), axis=1)
        gD[1:] += np.sum(f * _XI, axis=1)
        g = (gN - R * gD) / D
        g[0] = g[-1] = 0.0
        return g

    def banded(self, u, s, ratio, sigma):
        """Tridiagonal (interior nodes) form of ``K - sigma M``."""
        p = self.p
        s2 = s * s
        # p < 2: the weights blow up where the slope vanishes; floor them
        # at a fraction of the bulk scale max|u| / width
        scale = np.max(np.abs(u)) / np.sum(self.w)
        if p < 2:
            s2 = s2 + 1e-10 * scale**2
        c = _curvature(p) * self.we * s2 ** (0.5 * p - 1) / self.w**2
        r2 = ratio**2
        if p < 2:
            r2 = r2 + 1e-10 * (scale * np.sum(self.w) ** (1 - self.a)) ** 2
        m = _curvature(p) * self.wq * r2 ** (0.5 * p - 1) / self.da**2
        m00 = np.sum(m * (1 - _XI) ** 2, axis=1)
        m01 = np.sum(m * (1 - _XI) * _XI, axis=1)
        m11 = np.sum(m * _XI**2, axis=1)
        diag = np.zeros(self.N)
        diag[:-1] += c - sigma * m00
        diag[1:] += c - sigma * m11
        off = -c - sigma * m01
        ab = np.zeros((3, self.N - 2))
        ab[1] = diag[1:-1]
        ab[0, 1:] = off[1:-1]
        ab[2, :-1] = off[1:-1]
        return ab


def _scaled_solve(ab: np.ndarray, rhs: np.ndarray) -> np.ndarray:
    """Tridiagonal solve after symmetric diagonal scaling.

    Diagonal entries span many decades on deep grids; without the scaling
    the pivoted band solver loses the sign of ``g . z``.
    """
    diag = np.abs(ab[1])
    s = 1.0 / np.sqrt(np.where(diag > 0, diag, 1.0))
    sc = ab.copy()
    sc[1] *= s * s
    sc[0, 1:] *= s[:-1] * s[1:]
    sc[2, :-1] *= s[1:] * s[:-1]
    return s * solve_banded((1, 1), sc, s * rhs)


def radial_constant(problem: RadialProblem, tol_gradient: float = 1e-8,
                    tol_value: float = 1e-12, max_iterations: int = 2000) -> RadialResult:
    """Minimise the radial quotient; returns the value and the nodal profile.

    The descent is the one of :func:`hardyp.solver.minimize_quotient` on the
    tridiagonal radial operators.
    """
    from .solver import shift_candidates

    op = _Radial(problem)
    p, a = problem.p, problem.a
    g = problem.grid
    T = g.outer - g.inner
    d = g.offsets
    u = d ** (1.0 - a / p) * (1.0 - d / T)
    u[0] = u[-1] = 0.0

    def normalise(v):
        _, D, *_ = op.state(v)
        v = v / D ** (1.0 / p)
        return v, op.state(v)

    u, st = normalise(u)
    R = st[0] / st[1]
    history = [R]
    t, change, res = 1.0, math.inf, math.inf
    converged = False
    for it in range(1, max_iterations + 1):
        gi = op.gradient(u, *st)[1:-1]
        z = None
        for sigma in shift_candidates(R, res):
            zc = _scaled_solve(op.banded(u, st[2], st[4], sigma), gi)
            gz = float(gi @ zc)
            if np.all(np.isfinite(zc)) and gz > 0:
                z = zc
                break
        if z is None:
            converged = res <= 100 * tol_gradient
            break
        res = math.sqrt(gz) / R
        if res <= tol_gradient and change <= tol_value:
            converged = True
            break
        step = np.zeros_like(u)
        step[1:-1] = -z
        t = min(1.0, 2 * t)
        accepted = False
        while t > 1e-14:
            cand, cst = normalise(np.abs(u + t * step))
            Rc = cst[0] / cst[1]
            if Rc <= R - 1e-4 * t * gz:
                accepted = True
                break
            t *= 0.5
        if not accepted:
            # round-off floor of the quotient evaluation
            converged = res <= 100 * tol_gradient
            break
        u, st = cand, cst
        change = (R - Rc) / Rc
        R = Rc
        history.append(R)
    if not converged:
        raise NonConvergenceError(len(history) - 1, res)
    return RadialResult(R, g.radii, u, len(history) - 1, p, a, history)


# ---------------------------------------------------------------------------
# p = 2 eigenvalues


def bessel_j0(x: float) -> float:
    """Power series of ``J_0``; accurate to round-off for ``|x| <= 10``."""
    term, total, k = 1.0, 1.0, 0
    y = -(x * x) / 4.0
    while abs(term) > 1e-18 * max(1.0, abs(total)):
        k += 1
        term *= y / (k * k)
        total += term
    return total


def bessel_j0_first_zero() -> float:
    lo, hi = 2.0, 3.0
    while hi - lo > 1e-15:
        mid = 0.5 * (lo + hi)
        if bessel_j0(mid) > 0:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


@dataclass(frozen=True)
class IntervalShape:
    length: float


@dataclass(frozen=True)
class Disk:
    radius: float


def classical_eigen_reference(shape) -> float:
    """First Dirichlet Laplacian eigenvalue of an interval or a disk."""
    if isinstance(shape, IntervalShape):
        return math.pi**2 / shape.length**2
    if isinstance(shape, Disk):
        return (bessel_j0_first_zero() / shape.radius) ** 2
    raise ValueError(f"no classical reference for {shape!r}")


def export_oracle(record: dict, path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    rec = dict(record)
    rec["source"] = "oracle"
    path.write_text(json.dumps(rec, indent=2, sort_keys=True) + "\n")
    return path

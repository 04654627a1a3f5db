"""Piecewise-linear fields and the weighted Rayleigh quotient.

For a P1 field ``u`` vanishing on the boundary the quotient is

    R_{p,a}[u] = int |grad u|^p  /  int |u|^p / d^(a p)

with ``a = 1`` for the Hardy quotient and ``a = 0`` for the p-Laplacian
eigenvalue.  Triangle quadrature uses a collapsed (Duffy) product rule whose
degenerate vertex is local vertex 0, which mesh builders place on the
boundary; along rays from that vertex ``u/d`` is constant, so the rule stays
accurate on elements touching the boundary.
"""
from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

import numpy as np
import scipy.sparse as sp
from scipy.special import roots_jacobi

from .errors import DegenerateFieldError, QuadratureOverflowError
from .mesh import Mesh

DEFAULT_ORDER = 4


class Mode(str, Enum):
    GRADIENT_POWER = "gradient_power"
    WEIGHTED_POWER = "weighted_power"
    GRADIENT_POWER_LOG = "gradient_power_log"
    WEIGHTED_POWER_LOG = "weighted_power_log"


@dataclass(frozen=True, eq=False)
class Field:
    """P1 coefficient vector on a mesh, zero on boundary vertices."""

    mesh: Mesh
    coefficients: np.ndarray

    def __post_init__(self):
        c = np.asarray(self.coefficients, dtype=float)
        if c.shape != (self.mesh.n_vertices,):
            raise ValueError(f"expected {self.mesh.n_vertices} coefficients, got {c.shape}")
        if np.any(c[self.mesh.boundary] != 0.0):
            raise DegenerateFieldError("field must vanish on boundary vertices")
        c.setflags(write=False)
        object.__setattr__(self, "coefficients", c)

    @classmethod
    def from_function(cls, mesh: Mesh, f) -> "Field":
        x = mesh.vertices[:, 0] if mesh.dim == 1 else mesh.vertices
        c = np.array(f(x), dtype=float)
        c[mesh.boundary] = 0.0
        return cls(mesh, c)

    @classmethod
    def distance(cls, mesh: Mesh) -> "Field":
        return cls(mesh, mesh.distance.copy())

    def scaled(self, k: float) -> "Field":
        return Field(self.mesh, k * self.coefficients)


@dataclass(frozen=True)
class QuotientValue:
    numerator: float
    denominator: float
    value: float
    p: float
    a: float


# ---------------------------------------------------------------------------
# quadrature


def reference_rule(dim: int, order: int = DEFAULT_ORDER):
    """Reference points as barycentric coordinates and weights summing to 1."""
    if dim == 1:
        x, w = np.polynomial.legendre.leggauss(order)
        xi = 0.5 * (x + 1.0)
        return np.stack([1.0 - xi, xi], axis=1), 0.5 * w
    xr, wr = roots_jacobi(order, 0.0, 1.0)
    xi, a = 0.5 * (xr + 1.0), wr / 4.0
    xe, we = np.polynomial.legendre.leggauss(order)
    eta, b = 0.5 * (xe + 1.0), 0.5 * we
    XI, ETA = np.meshgrid(xi, eta, indexing="ij")
    W = 2.0 * np.outer(a, b)
    XI, ETA, W = XI.ravel(), ETA.ravel(), W.ravel()
    lam = np.stack([1.0 - XI, XI * (1.0 - ETA), XI * ETA], axis=1)
    return lam, W


@dataclass(eq=False)
class Quadrature:
    weights: np.ndarray    # (m, nq) physical measure per point
    phi: np.ndarray        # (nq, k) basis values
    grads: np.ndarray      # (m, k, dim) chart-space basis gradients
    metric: np.ndarray | None  # (m, nq, dim) chart-to-physical gradient scaling
    dist: np.ndarray       # (m, nq) exact distance to the boundary
    elements: np.ndarray
    n_vertices: int

    def values(self, u: np.ndarray) -> np.ndarray:
        return u[self.elements] @ self.phi.T

    def gradients(self, u: np.ndarray):
        """Chart gradient per element and squared physical norm per point."""
        g = np.einsum("mkd,mk->md", self.grads, u[self.elements])
        if self.metric is None:
            return g, np.sum(g * g, axis=1)[:, None]
        gq = g[:, None, :] * self.metric
        return g, np.sum(gq * gq, axis=2)

    def scatter(self, local: np.ndarray) -> np.ndarray:
        """Assemble per-element vertex contributions ``(m, k)`` into a vector."""
        return np.bincount(self.elements.ravel(), weights=local.ravel(),
                           minlength=self.n_vertices)


def quadrature(mesh: Mesh, order: int = DEFAULT_ORDER) -> Quadrature:
    key = ("quad", order)
    if key in mesh._cache:
        return mesh._cache[key]
    lam, w = reference_rule(mesh.dim, order)
    J = mesh.jacobians
    el = mesh.elements
    if mesh.dim == 1:
        vol = J[:, 0, 0]
        grads = np.stack([-1.0 / vol, 1.0 / vol], axis=1)[:, :, None]
    else:
        det = J[:, 0, 0] * J[:, 1, 1] - J[:, 0, 1] * J[:, 1, 0]
        vol = 0.5 * det
        inv = np.empty_like(J)
        inv[:, 0, 0], inv[:, 0, 1] = J[:, 1, 1] / det, -J[:, 0, 1] / det
        inv[:, 1, 0], inv[:, 1, 1] = -J[:, 1, 0] / det, J[:, 0, 0] / det
        g12 = inv                      # rows: gradients of lambda_1, lambda_2
        grads = np.concatenate([-(g12[:, 0:1] + g12[:, 1:2]), g12], axis=1)
    weights = vol[:, None] * w[None, :]
    metric = None
    if mesh.chart == "polar":
        s = mesh.chart_coords[el, 0] @ lam.T
        r = mesh.domain.spec.inner + s
        weights = weights * r
        metric = np.stack([np.ones_like(r), 1.0 / r], axis=2)
    dist = mesh.distance[el] @ lam.T
    bad = ~mesh.affine_distance
    if np.any(bad):
        pts = _physical_points(mesh, lam, np.flatnonzero(bad))
        dist[bad] = mesh.domain.distance(pts.reshape(-1, mesh.dim), check=False).reshape(
            -1, lam.shape[0])
    if np.any(dist <= 0):
        raise QuadratureOverflowError("quadrature point on the boundary")
    q = Quadrature(weights, lam, grads, metric, dist, el, mesh.n_vertices)
    mesh._cache[key] = q
    return q


def _physical_points(mesh: Mesh, lam: np.ndarray, idx: np.ndarray) -> np.ndarray:
    chart = mesh.chart_coords[mesh.elements[idx]]       # (b, k, dim)
    pts = np.einsum("qk,bkd->bqd", lam, chart)
    if mesh.chart == "polar":
        r = mesh.domain.spec.inner + pts[..., 0]
        pts = np.stack([r * np.cos(pts[..., 1]), r * np.sin(pts[..., 1])], axis=-1)
    return pts


# ---------------------------------------------------------------------------
# integrals


def _xlogx_pow(t: np.ndarray, p: float) -> np.ndarray:
    """``t**p * ln t`` with the limit value 0 at ``t = 0``."""
    out = np.zeros_like(t)
    pos = t > 0
    out[pos] = t[pos] ** p * np.log(t[pos])
    return out


def _finite(x: float, what: str) -> float:
    if not np.isfinite(x):
        raise QuadratureOverflowError(f"{what} is not finite; refine the boundary grading")
    return float(x)


def integrate_weighted(mesh: Mesh, field: Field, p: float, a: float, mode: Mode,
                       order: int = DEFAULT_ORDER) -> float:
    """One of the four integrals entering the quotient and its p-derivative.

    ``GRADIENT_POWER``      int |grad u|^p
    ``WEIGHTED_POWER``      int |u|^p / d^(a p)
    ``GRADIENT_POWER_LOG``  int |grad u|^p ln |grad u|
    ``WEIGHTED_POWER_LOG``  int |u|^p / d^(a p) ln(|u| / d^a)
    """
    mode = Mode(mode)
    q = quadrature(mesh, order)
    u = field.coefficients
    with np.errstate(over="ignore", invalid="ignore"):
        if mode in (Mode.GRADIENT_POWER, Mode.GRADIENT_POWER_LOG):
            _, g2 = q.gradients(u)
            t = np.sqrt(g2)
            vals = t**p if mode is Mode.GRADIENT_POWER else _xlogx_pow(t, p)
            total = np.sum(np.broadcast_to(vals, q.weights.shape) * q.weights)
        else:
            ratio = np.abs(q.values(u)) / q.dist**a
            vals = ratio**p if mode is Mode.WEIGHTED_POWER else _xlogx_pow(ratio, p)
            total = np.sum(vals * q.weights)
    return _finite(total, mode.value)


@dataclass
class QuotientState:
    """Everything the solver needs from one pass over the quadrature points."""

    numerator: float
    denominator: float
    value: float
    grad_numerator: np.ndarray
    grad_denominator: np.ndarray
    grad_norm2: np.ndarray   # (m, nq) or (m, 1)
    ratio: np.ndarray        # (m, nq) |u| / d^a

    @property
    def gradient(self) -> np.ndarray:
        return (self.grad_numerator - self.value * self.grad_denominator) / self.denominator


def quotient_state(mesh: Mesh, u: np.ndarray, p: float, a: float,
                   order: int = DEFAULT_ORDER, with_gradient: bool = True) -> QuotientState:
    q = quadrature(mesh, order)
    with np.errstate(over="ignore", invalid="ignore", divide="ignore"):
        g, g2 = q.gradients(u)
        U = q.values(u)
        da = q.dist**a if a != 0 else np.ones_like(q.dist)
        ratio = np.abs(U) / da
        gp = g2 ** (0.5 * p)
        N = _finite(np.sum(np.broadcast_to(gp, q.weights.shape) * q.weights), "numerator")
        D = _finite(np.sum(ratio**p * q.weights), "denominator")
    if not D > 0:
        raise DegenerateFieldError("weighted norm of the field vanishes")
    R = N / D
    gN = gD = None
    if with_gradient:
        with np.errstate(divide="ignore", invalid="ignore"):
            c = np.where(g2 > 0, p * g2 ** (0.5 * p - 1.0), 0.0)
            if p >= 2:
                c = p * g2 ** (0.5 * p - 1.0)
        if q.metric is None:
            ce = np.sum(np.broadcast_to(c, q.weights.shape) * q.weights, axis=1)
            local = ce[:, None] * np.einsum("mkd,md->mk", q.grads, g)
        else:
            # int c * sum_k m_k^2 g_k dphi_k
            wm = (c * q.weights)[:, :, None] * q.metric**2     # (m, nq, dim)
            local = np.einsum("mkd,md,mqd->mk", q.grads, g, wm)
        gN = q.scatter(local)
        with np.errstate(divide="ignore", invalid="ignore"):
            f = np.where(ratio > 0, p * ratio ** (p - 1.0) * np.sign(U) / da, 0.0)
        gD = q.scatter((f * q.weights) @ q.phi)
        gN[mesh.boundary] = 0.0
        gD[mesh.boundary] = 0.0
    return QuotientState(N, D, R, gN, gD, g2, ratio)


def evaluate_quotient(mesh: Mesh, field: Field, p: float, a: float,
                      order: int = DEFAULT_ORDER) -> QuotientValue:
    st = quotient_state(mesh, field.coefficients, p, a, order, with_gradient=False)
    return QuotientValue(st.numerator, st.denominator, st.value, p, a)


def quotient_gradient(mesh: Mesh, field: Field, p: float, a: float,
                      order: int = DEFAULT_ORDER) -> np.ndarray:
    """Gradient of the quotient with respect to the vertex coefficients."""
    return quotient_state(mesh, field.coefficients, p, a, order).gradient


# ---------------------------------------------------------------------------
# linearised operators used to precondition the descent


def _pair_indices(mesh: Mesh):
    key = "pairs"
    if key not in mesh._cache:
        el = mesh.elements
        k = el.shape[1]
        rows = np.repeat(el, k, axis=1).ravel()
        cols = np.tile(el, (1, k)).ravel()
        fmap = -np.ones(mesh.n_vertices, dtype=np.int64)
        fmap[mesh.free] = np.arange(len(mesh.free))
        keep = (fmap[rows] >= 0) & (fmap[cols] >= 0)
        mesh._cache[key] = (fmap[rows[keep]], fmap[cols[keep]], keep, len(mesh.free))
    return mesh._cache[key]


def _floored_power(t2: np.ndarray, expo: float, floor: float) -> np.ndarray:
    """``t2**expo``, with ``t2`` floored when the exponent is negative (p < 2)."""
    return t2**expo if expo >= 0 else (t2 + floor) ** expo


def linearized_operators(mesh: Mesh, u: np.ndarray, p: float, a: float,
                         order: int = DEFAULT_ORDER, state: QuotientState | None = None):
    """Free-dof matrices ``K`` and ``M`` modelling the second variations.

    ``K ~ c_p int |grad u|^(p-2) grad v . grad w`` and
    ``M ~ c_p int |u|^(p-2) d^(-a p) v w`` with ``c_p = p max(p-1, 1)``;
    ``K - sigma M`` with sigma below the current quotient is the
    preconditioner of the descent.
    """
    q = quadrature(mesh, order)
    st = state or quotient_state(mesh, u, p, a, order, with_gradient=False)
    k = q.phi.shape[1]
    # secant weights below p = 2 (the Hessian weight is singular where the
    # slope vanishes and makes Newton-like steps oscillate), Hessian above
    curv = p * max(p - 1.0, 1.0)
    # bulk scales of |grad u| and |u|/d^a; deep layers must not set the floor
    diam = mesh.domain.diameter
    umax = float(np.max(np.abs(u)))
    c = curv * _floored_power(st.grad_norm2, 0.5 * p - 1.0, 1e-10 * (umax / diam) ** 2)
    if q.metric is None:
        ce = np.sum(np.broadcast_to(c, q.weights.shape) * q.weights, axis=1)
        Ke = ce[:, None, None] * np.einsum("mid,mjd->mij", q.grads, q.grads)
    else:
        wm = (np.broadcast_to(c, q.weights.shape) * q.weights)[:, :, None] * q.metric**2
        Ke = np.einsum("mid,mjd,mqd->mij", q.grads, q.grads, wm)
    da2 = q.dist ** (2 * a) if a != 0 else 1.0
    m = curv * _floored_power(st.ratio**2, 0.5 * p - 1.0,
                                       1e-10 * (umax / diam**a) ** 2) / da2
    Me = np.einsum("mq,qi,qj->mij", m * q.weights, q.phi, q.phi)
    rows, cols, keep, n = _pair_indices(mesh)
    K = sp.csc_matrix((Ke.reshape(len(Ke), k * k).ravel()[keep], (rows, cols)), shape=(n, n))
    M = sp.csc_matrix((Me.reshape(len(Me), k * k).ravel()[keep], (rows, cols)), shape=(n, n))
    return K, M


def export_field(field: Field, path, p: float, a: float, value: float) -> None:
    with open(path, "w") as fh:
        fh.write(f"# p={p:.12g} a={a:.12g} value={value:.12g}\n")
        for c in field.coefficients:
            fh.write(f"{c:.17g}\n")


def read_field(path, mesh: Mesh) -> tuple[Field, dict]:
    with open(path) as fh:
        header = fh.readline().lstrip("#").split()
        meta = {k: float(v) for k, v in (item.split("=") for item in header)}
        coeffs = np.array([float(line) for line in fh if line.strip()])
    return Field(mesh, coeffs), meta

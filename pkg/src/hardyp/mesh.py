"""Boundary-graded conforming meshes.

Rectangles, annuli and intervals are meshed from tensor products of graded
1-D axes.  Each axis stores the distance of its nodes to the nearer end and
its cell widths directly, so layers as thin as 1e-30 survive in double
precision even next to a boundary at ``x = 1``.  Annuli are meshed in polar
coordinates ``(s, theta)`` with ``s = r - inner``, so the discrete domain is
the true annulus.  General polygons go through a constrained Delaunay mesher
with isotropic grading.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .domain import Annulus, Domain, Interval, Polygon, axis_aligned_box
from .errors import DomainError, ResolutionTooCoarseError

# side bits used to decide where the distance function is affine
_LEFT, _RIGHT, _BOTTOM, _TOP = 1, 2, 4, 8


@dataclass(eq=False)
class Mesh:
    vertices: np.ndarray          # (n, dim) physical coordinates
    elements: np.ndarray          # (m, dim + 1), positively oriented
    boundary: np.ndarray          # (n,) bool
    distance: np.ndarray          # (n,) exact distance to the boundary
    h_target: float
    grading_factor: float
    domain: Domain
    jacobians: np.ndarray         # (m, dim, dim) chart-space edge vectors, columns v_k - v_0
    chart: str = "identity"       # "identity" or "polar"
    chart_coords: np.ndarray = None   # (n, dim); polar: (s, theta)
    affine_distance: np.ndarray = None  # (m,) bool: d is affine on the element
    depth: float = 0.0
    _cache: dict = field(default_factory=dict, repr=False)

    @property
    def dim(self) -> int:
        return self.vertices.shape[1]

    @property
    def n_vertices(self) -> int:
        return self.vertices.shape[0]

    @property
    def n_elements(self) -> int:
        return self.elements.shape[0]

    @property
    def free(self) -> np.ndarray:
        return np.flatnonzero(~self.boundary)

    def signed_volumes(self) -> np.ndarray:
        """Chart-space signed element volumes (lengths in 1-D, areas in 2-D)."""
        if self.dim == 1:
            return self.jacobians[:, 0, 0]
        return 0.5 * np.linalg.det(self.jacobians)

    def element_diameters(self) -> np.ndarray:
        """Physical element diameters computed from the exact edge vectors."""
        J = self.jacobians
        if self.dim == 1:
            return np.abs(J[:, 0, 0])
        e1, e2 = J[:, :, 0], J[:, :, 1]
        e3 = e2 - e1
        if self.chart == "polar":
            inner = self.domain.spec.inner
            r = inner + self.chart_coords[self.elements, 0].max(axis=1)
            edges = [e1, e2, e3]
            lengths = [np.hypot(e[:, 0], r * e[:, 1]) for e in edges]
        else:
            lengths = [np.hypot(e[:, 0], e[:, 1]) for e in (e1, e2, e3)]
        return np.max(lengths, axis=0)

    def element_distance(self) -> np.ndarray:
        """Largest vertex distance per element."""
        return self.distance[self.elements].max(axis=1)


# ---------------------------------------------------------------------------
# graded axes


@dataclass
class GradedAxis:
    length: float
    dist: np.ndarray    # distance of each node to the nearer end
    widths: np.ndarray  # cell widths, exact
    bits: np.ndarray    # 1 = left half, 2 = right half, 3 = midpoint

    @property
    def positions(self) -> np.ndarray:
        return np.where(self.bits == 2, self.length - self.dist, self.dist)

    @property
    def n(self) -> int:
        return len(self.dist)


def boundary_layers(base: float, ratio: float, depth: float) -> np.ndarray:
    """Geometric layer offsets ``base/ratio**j`` down to ``depth``, increasing."""
    if ratio <= 1.0 or depth >= base:
        return np.empty(0)
    k = int(math.ceil(math.log(base / depth) / math.log(ratio) - 1e-9))
    return base * ratio ** -np.arange(k, 0, -1, dtype=float)


def dyadic_count(length: float, h: float, minimum: int = 1) -> int:
    """Smallest power of two ``n >= minimum`` with ``length / n <= h``.

    Powers of two make meshes built with ``h`` and ``h/2`` nested, so the
    discrete spaces of a halving ladder are nested too.
    """
    n = max(1, minimum)
    while length / n > h * (1 + 1e-12):
        n *= 2
    return n


def graded_axis(length: float, h: float, ratio: float, depth: float,
                base: float | None = None) -> GradedAxis:
    """1-D grid on ``[0, length]`` symmetric about the midpoint.

    Cells have width at most ``h``; inside the first cell the nodes follow a
    geometric progression of ratio ``ratio`` down to ``depth``.  ``base``
    overrides the width of the first uniform cell (used to share layer values
    between the two axes of a rectangle).
    """
    half = 0.5 * length
    if base is None:
        base = half / dyadic_count(half, h)
    base = min(base, half)
    layers = boundary_layers(base, ratio, depth)
    ratio_hb = half / base
    if abs(ratio_hb - round(ratio_hb)) < 1e-9:
        m = round(ratio_hb) - 1       # bulk continues at spacing base
    else:
        m = max(1, math.ceil((half - base) / h - 1e-12)) if half > base else 0
    uniform = base + (half - base) * np.arange(1, m + 1) / m if m else np.empty(0)
    left = np.concatenate([[0.0], layers, [base], uniform])
    left[-1] = half
    left = left[np.concatenate([[True], np.diff(left) > 0])]
    w_left = np.diff(left)
    dist = np.concatenate([left, left[-2::-1]])
    widths = np.concatenate([w_left, w_left[::-1]])
    nl = len(left)
    bits = np.concatenate([np.full(nl - 1, _LEFT), [_LEFT | _RIGHT], np.full(nl - 1, _RIGHT)])
    return GradedAxis(length, dist, widths, bits)


# ---------------------------------------------------------------------------
# structured meshes


def _boundary_first_order(flags: np.ndarray) -> np.ndarray:
    """Cyclic rotation per element putting a boundary vertex in local slot 0.

    With that convention the collapsed-coordinate quadrature has its
    degenerate point on the boundary, where ``u/d`` is direction dependent.
    Elements owning a boundary edge start on that edge.
    """
    k = flags.shape[1]
    shift = np.argmax(flags, axis=1)
    if k == 3:
        both = flags & np.roll(flags, -1, axis=1)
        shift = np.where(both.any(axis=1), np.argmax(both, axis=1), shift)
    return (np.arange(k)[None, :] + shift[:, None]) % k


def _rotate_boundary_first(elements: np.ndarray, boundary: np.ndarray) -> np.ndarray:
    return np.take_along_axis(elements, _boundary_first_order(boundary[elements]), axis=1)


def _tensor_triangles(nx: int, ny: int, wx: np.ndarray, wy: np.ndarray,
                      anti: np.ndarray, periodic_y: bool = False):
    """Split every cell of an ``nx`` by ``ny`` node grid into two triangles.

    Returns ``(corner_ids, offsets)``: global corner indices of each
    triangle and the exact chart-space offsets of those corners from the
    cell origin.  ``anti`` marks cells cut along the anti-diagonal.
    """
    ncy = ny if periodic_y else ny - 1
    I, J = np.meshgrid(np.arange(nx - 1), np.arange(ncy), indexing="ij")
    I, J = I.ravel(), J.ravel()
    J1 = (J + 1) % ny
    a, b = I * ny + J, (I + 1) * ny + J
    c, e = (I + 1) * ny + J1, I * ny + J1
    corners = np.stack([a, b, c, e], axis=1)
    dx, dy = wx[I], wy[J]
    zero = np.zeros_like(dx)
    off = np.stack([np.stack([zero, zero], 1), np.stack([dx, zero], 1),
                    np.stack([dx, dy], 1), np.stack([zero, dy], 1)], axis=1)
    an = anti.ravel()
    t1 = np.where(an[:, None], [0, 1, 3], [0, 1, 2])
    t2 = np.where(an[:, None], [1, 2, 3], [0, 2, 3])
    local = np.concatenate([t1, t2])
    cell = np.concatenate([np.arange(len(I))] * 2)
    return corners, off, local, cell


def _finish_tensor(corners, off, local, cell, boundary, bits_v):
    tri = np.take_along_axis(corners[cell], local, axis=1)
    order = _boundary_first_order(boundary[tri])
    local = np.take_along_axis(local, order, axis=1)
    tri = np.take_along_axis(tri, order, axis=1)
    o = off[cell[:, None], local]    # (m, 3, 2)
    jac = np.stack([o[:, 1] - o[:, 0], o[:, 2] - o[:, 0]], axis=2)
    affine = np.bitwise_and.reduce(bits_v[tri], axis=1) != 0
    return tri, jac, affine


def _interval_mesh(domain: Domain, h: float, ratio: float, depth: float) -> Mesh:
    L = domain.spec.length
    ax = graded_axis(L, h, ratio, depth)
    n = ax.n
    elements = np.stack([np.arange(n - 1), np.arange(1, n)], axis=1)
    boundary = ax.dist == 0
    jac = ax.widths[:, None, None].copy()
    affine = np.bitwise_and(ax.bits[elements[:, 0]], ax.bits[elements[:, 1]]) != 0
    pos = ax.positions[:, None]
    return Mesh(pos, elements, boundary, ax.dist.copy(), h, ratio, domain, jac,
                chart_coords=pos.copy(), affine_distance=affine, depth=depth)


def _rectangle_mesh(domain: Domain, box, h: float, ratio: float, depth: float) -> Mesh:
    x0, y0, x1, y1 = box
    Lx, Ly = x1 - x0, y1 - y0
    base = min(0.5 * Lx / dyadic_count(0.5 * Lx, h), 0.5 * Ly / dyadic_count(0.5 * Ly, h))
    ax = graded_axis(Lx, h, ratio, depth, base=base)
    ay = graded_axis(Ly, h, ratio, depth, base=base)
    nx, ny = ax.n, ay.n
    DX, DY = np.meshgrid(ax.dist, ay.dist, indexing="ij")
    BX, BY = np.meshgrid(ax.bits, ay.bits * 4, indexing="ij")
    dist = np.minimum(DX, DY).ravel()
    bits_v = np.where(DX < DY, BX, np.where(DY < DX, BY, BX | BY)).ravel()
    PX, PY = np.meshgrid(x0 + ax.positions, y0 + ay.positions, indexing="ij")
    verts = np.stack([PX.ravel(), PY.ravel()], axis=1)
    boundary = dist == 0
    # cells in the lower-right and upper-left quadrants use the anti-diagonal
    cx = (ax.positions[:-1] + ax.positions[1:]) / 2 < Lx / 2
    cy = (ay.positions[:-1] + ay.positions[1:]) / 2 < Ly / 2
    anti = cx[:, None] != cy[None, :]
    corners, off, local, cell = _tensor_triangles(nx, ny, ax.widths, ay.widths, anti)
    tri, jac, affine = _finish_tensor(corners, off, local, cell, boundary, bits_v)
    return Mesh(verts, tri, boundary, dist, h, ratio, domain, jac,
                chart_coords=verts.copy(), affine_distance=affine, depth=depth)


def _annulus_mesh(domain: Domain, h: float, ratio: float, depth: float) -> Mesh:
    spec = domain.spec
    T = spec.outer - spec.inner
    ax = graded_axis(T, h, ratio, depth)
    # chord length at the outer circle at most h
    ntheta = dyadic_count(math.pi / math.asin(min(1.0, h / (2 * spec.outer))), 1.0, minimum=8)
    dtheta = 2 * math.pi / ntheta
    theta = dtheta * np.arange(ntheta)
    nr = ax.n
    S, TH = np.meshgrid(ax.positions, theta, indexing="ij")
    R = spec.inner + S
    # boundary vertices lie exactly on the circles
    R[0, :], R[-1, :] = spec.inner, spec.outer
    verts = np.stack([(R * np.cos(TH)).ravel(), (R * np.sin(TH)).ravel()], axis=1)
    dist = np.repeat(ax.dist, ntheta)
    bits_v = np.repeat(ax.bits, ntheta)
    boundary = dist == 0
    anti = np.zeros((nr - 1, ntheta), dtype=bool)
    corners, off, local, cell = _tensor_triangles(
        nr, ntheta, ax.widths, np.full(ntheta, dtheta), anti, periodic_y=True)
    tri, jac, affine = _finish_tensor(corners, off, local, cell, boundary, bits_v)
    chart = np.stack([S.ravel(), TH.ravel()], axis=1)
    return Mesh(verts, tri, boundary, dist, h, ratio, domain, jac, chart="polar",
                chart_coords=chart, affine_distance=affine, depth=depth)


def _cross2(u: np.ndarray, v: np.ndarray) -> np.ndarray:
    return u[:, 0] * v[:, 1] - u[:, 1] * v[:, 0]


def _polygon_mesh(domain: Domain, h: float, ratio: float, depth: float) -> Mesh:
    import triangle as tr

    v = np.asarray(domain.spec.vertices, dtype=float)
    n = len(v)
    # boundary resolution: spacing equals the graded size at the boundary
    pts, segs = [], []
    for i in range(n):
        a, b = v[i], v[(i + 1) % n]
        length = float(np.linalg.norm(b - a))
        k = max(1, math.ceil(length / _boundary_spacing(h, ratio, depth)))
        for j in range(k):
            pts.append(a + (b - a) * j / k)
    pts = np.asarray(pts)
    m = len(pts)
    segs = np.stack([np.arange(m), (np.arange(m) + 1) % m], axis=1)
    mesh = tr.triangulate({"vertices": pts, "segments": segs},
                          f"pq28Qa{0.5 * h * h:.17g}")
    for _ in range(200):
        V, T = mesh["vertices"], mesh["triangles"]
        cen = V[T].mean(axis=1)
        dc = domain.distance(cen, check=False)
        size = _size(dc, h, ratio, depth)
        target = np.sqrt(3) / 4 * size**2
        area = 0.5 * np.abs(_cross2(V[T[:, 1]] - V[T[:, 0]], V[T[:, 2]] - V[T[:, 0]]))
        if np.all(area <= 1.05 * target):
            break
        mesh = tr.triangulate(
            {"vertices": V, "segments": mesh["segments"], "triangles": T,
             "triangle_max_area": np.minimum(area, target)},
            "rpq28Qa")
    V = mesh["vertices"].astype(float)
    T = mesh["triangles"].astype(np.int64)
    markers = mesh["vertex_markers"].ravel().astype(bool)
    dist = domain.distance(V, check=False)
    boundary = markers | (dist <= 1e-14 * domain.diameter)
    dist[boundary] = 0.0
    sv = _cross2(V[T[:, 1]] - V[T[:, 0]], V[T[:, 2]] - V[T[:, 0]])
    T[sv < 0] = T[sv < 0][:, [0, 2, 1]]
    T = _rotate_boundary_first(T, boundary)
    jac = np.stack([V[T[:, 1]] - V[T[:, 0]], V[T[:, 2]] - V[T[:, 0]]], axis=2)
    return Mesh(V, T, boundary, dist, h, ratio, domain, jac, chart_coords=V.copy(),
                affine_distance=np.zeros(len(T), dtype=bool), depth=depth)


def _size(d, h, ratio, depth):
    if ratio <= 1.0:
        return np.full_like(np.asarray(d, dtype=float), h)
    return np.clip((ratio - 1.0) * np.asarray(d) * 2.0, depth, h)


def _boundary_spacing(h, ratio, depth):
    return h if ratio <= 1.0 else max(depth, 1e-9 * h)


STRUCTURED_DEPTH_EXPONENT = 24


def default_depth(domain: Domain, h: float, ratio: float) -> float:
    """Thinnest boundary layer used when none is requested."""
    if ratio <= 1.0:
        return h
    diam = domain.diameter
    if isinstance(domain.spec, Polygon) and axis_aligned_box(domain) is None:
        return h * ratio ** -6
    # tensor and polar layers cost only a logarithmic number of vertices, so
    # they go very deep; tying the depth to h makes refinement ladders
    # decrease even though anisotropic strips are not nested
    return diam * (h / diam) ** STRUCTURED_DEPTH_EXPONENT


def triangulate(domain: Domain, h_target: float, grading_factor: float = 2.0,
                depth: float | None = None) -> Mesh:
    """Build a conforming boundary-graded mesh of ``domain``.

    ``grading_factor`` is the ratio between consecutive boundary-layer
    thicknesses (1 gives a uniform mesh) and ``depth`` the thinnest layer.
    """
    if not h_target > 0:
        raise ResolutionTooCoarseError("h_target must be positive")
    if h_target > domain.diameter / 2:
        raise ResolutionTooCoarseError(
            f"h_target={h_target} exceeds half the diameter {domain.diameter}")
    if grading_factor < 1.0:
        raise DomainError("grading_factor must be >= 1")
    if depth is None:
        depth = default_depth(domain, h_target, grading_factor)
    spec = domain.spec
    if isinstance(spec, Interval):
        return _interval_mesh(domain, h_target, grading_factor, depth)
    if isinstance(spec, Annulus):
        return _annulus_mesh(domain, h_target, grading_factor, depth)
    box = axis_aligned_box(domain)
    if box is not None:
        return _rectangle_mesh(domain, box, h_target, grading_factor, depth)
    return _polygon_mesh(domain, h_target, grading_factor, depth)


def check_mesh(mesh: Mesh, tol: float = 1e-12) -> list[str]:
    """Return the list of violated mesh invariants (empty when valid)."""
    problems = []
    if np.any(mesh.signed_volumes() <= 0):
        problems.append("non-positive element volume")
    if mesh.dim == 2:
        edges = np.concatenate([mesh.elements[:, [0, 1]], mesh.elements[:, [1, 2]],
                                mesh.elements[:, [2, 0]]])
        key = np.sort(edges, axis=1)
        _, counts = np.unique(key, axis=0, return_counts=True)
        if np.any(counts > 2):
            problems.append("edge shared by more than two elements")
        # an oriented edge may appear only once in a consistently oriented mesh
        _, ocounts = np.unique(edges, axis=0, return_counts=True)
        if np.any(ocounts > 1):
            problems.append("inconsistent orientation")
    if np.any(mesh.distance[mesh.boundary] != 0) or np.any(mesh.distance[~mesh.boundary] <= 0):
        problems.append("distance not zero exactly on the boundary")
    geo = mesh.domain.distance(mesh.vertices, check=False)
    if np.any(np.abs(geo - mesh.distance) > tol * mesh.domain.diameter):
        problems.append("vertex distance differs from exact geometry")
    return problems


def export_mesh(mesh: Mesh, path) -> None:
    """Plain-text node/element export."""
    with open(path, "w") as fh:
        fh.write(f"{mesh.n_vertices} {mesh.n_elements} {mesh.dim}\n")
        for i, (x, d, b) in enumerate(zip(mesh.vertices, mesh.distance, mesh.boundary)):
            coords = " ".join(f"{c:.17g}" for c in (list(x) + [0.0] * (2 - mesh.dim)))
            fh.write(f"{i} {coords} {d:.17g} {int(b)}\n")
        for el in mesh.elements:
            fh.write(" ".join(str(int(k)) for k in el) + "\n")


def read_mesh_export(path):
    """Parse :func:`export_mesh` output into plain arrays."""
    with open(path) as fh:
        nv, ne, dim = (int(t) for t in fh.readline().split())
        nodes = np.array([[float(t) for t in fh.readline().split()] for _ in range(nv)])
        elems = np.array([[int(t) for t in fh.readline().split()] for _ in range(ne)])
    return {"index": nodes[:, 0].astype(int), "xy": nodes[:, 1:3], "distance": nodes[:, 3],
            "boundary": nodes[:, 4].astype(bool), "elements": elems}

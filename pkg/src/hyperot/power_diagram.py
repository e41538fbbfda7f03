"""Hyperbolic power diagrams and their weighted Delaunay duals.

A weighted site is a centre ``x_i`` on the sheet with a height ``phi_i``.
Its lifted point is ``z_i = exp(-phi_i) x_i`` and the power of a point ``q``
with respect to the site is ``exp(-phi_i) cosh d(q, x_i) = -<q, z_i>``.
Cells collect the points of least power.  The triangulation is read off the
faces of ``conv{z_i}`` that look towards the origin; the dual vertex of a
face is its Lorentz normal.

Two modes are supported.  In planar mode the cells are intersected with a
geodesically convex polygon.  In surface mode the points are translated
copies of the sites under a Fuchsian group and the cells of the canonical
copies are read off the triangulation directly.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.spatial import cKDTree

from . import _cells, _hull
from .errors import (
    DegenerateInputError,
    DuplicateSiteError,
    GeometryError,
    SizeError,
)
from .lorentz import (
    check_hpoint,
    hyperbolic_distance,
    hyperboloid_to_disk,
    hyperboloid_to_klein,
    lorentz_cross,
    lorentz_inner,
    normalize,
    signed_triangle_area,
)

DEGENERATE_AREA = 1e-12
PREDICATE_EPS = 1e-12


@dataclass(frozen=True)
class GeodesicCircle:
    """Weighted site: centre on the sheet and height ``phi``.

    For ``phi >= 0`` the site is the geodesic circle of radius ``r`` with
    ``cosh r = exp(phi)``.  Negative heights have no real radius but are
    legitimate after the heights are shifted to sum to zero.
    """

    center: np.ndarray
    height: float

    @classmethod
    def from_radius(cls, center, radius: float) -> "GeodesicCircle":
        if not radius > 0:
            raise GeometryError("radius must be positive")
        return cls(np.asarray(center, dtype=float), float(np.log(np.cosh(radius))))

    @property
    def radius(self) -> float:
        return float(np.arccosh(np.exp(self.height))) if self.height >= 0 else float("nan")

    @property
    def rho(self) -> float:
        return float(np.exp(-self.height))


def power_distance(q, center, height):
    """Hyperbolic cosine of the power distance: ``exp(-phi) cosh d(q, center)``.

    Broadcasts over leading axes.
    """
    return -lorentz_inner(q, center) * np.exp(-np.asarray(height, dtype=float))


def lifted_points(centers, heights):
    return np.exp(-np.asarray(heights, dtype=float))[:, None] * np.asarray(centers, dtype=float)


def check_sites(centers, heights, min_sites: int = 3, min_separation: float = 1e-9):
    centers = check_hpoint(np.atleast_2d(np.asarray(centers, dtype=float)))
    heights = np.asarray(heights, dtype=float).reshape(-1)
    if centers.ndim != 2 or heights.shape[0] != centers.shape[0]:
        raise GeometryError("centers and heights must have matching lengths")
    if not np.all(np.isfinite(heights)):
        raise GeometryError("heights must be finite")
    if centers.shape[0] < min_sites:
        raise SizeError(f"need at least {min_sites} sites, got {centers.shape[0]}")
    _check_distinct(centers, min_separation)
    return centers, heights


def _check_distinct(centers, min_separation):
    # the Euclidean chord in R^3 bounds the hyperbolic distance from above up
    # to a factor of 3 x3, so a kd-tree query with a padded radius finds
    # every candidate pair
    pad = 3.0 * float(centers[:, 2].max())
    pairs = cKDTree(centers).query_pairs(min_separation * pad, output_type="ndarray")
    if len(pairs):
        d = hyperbolic_distance(centers[pairs[:, 0]], centers[pairs[:, 1]])
        close = np.nonzero(d <= min_separation)[0]
        if len(close):
            i, j = pairs[close[0]]
            raise DuplicateSiteError(f"sites {i} and {j} coincide")


def spatial_order(points):
    """Hilbert curve order of points on the sheet, via Klein coordinates."""
    k = hyperboloid_to_klein(points)
    lo = k.min(axis=0)
    span = max(float((k.max(axis=0) - lo).max()), 1e-300)
    bits = 16
    side = 1 << bits
    q = np.clip(((k - lo) / span * (side - 1)).astype(np.int64), 0, side - 1)
    x = q[:, 0].copy()
    y = q[:, 1].copy()
    d = np.zeros(len(x), dtype=np.int64)
    s = side >> 1
    while s > 0:
        rx = (x & s) > 0
        ry = (y & s) > 0
        d += s * s * ((3 * rx) ^ ry)
        # rotate the quadrant
        flip = ~ry
        swap_x = flip & rx
        x = np.where(swap_x, side - 1 - x, x)
        y = np.where(swap_x, side - 1 - y, y)
        x, y = np.where(flip, y, x), np.where(flip, x, y)
        s >>= 1
    return np.argsort(d, kind="stable")


@dataclass
class ConvexHull:
    """Faces of the lifted hull that look towards the origin, plus ghost faces.

    ``faces`` lists every face of the closed triangulated sphere, with vertex
    index ``n`` standing for the origin; faces are counterclockwise in the
    Klein projection and ``neighbors[t, k]`` is the face across the edge
    opposite ``faces[t, k]``.  ``normals[t]`` is the dual vertex: on the sheet
    when ``timelike[t]``, a unit spacelike vector otherwise.
    """

    lifted: np.ndarray
    faces: np.ndarray
    neighbors: np.ndarray
    normals: np.ndarray
    timelike: np.ndarray
    hidden: np.ndarray

    @property
    def n_points(self) -> int:
        return self.lifted.shape[0]

    @property
    def real_faces(self) -> np.ndarray:
        return np.all(self.faces < self.n_points, axis=1)

    def triangles(self) -> np.ndarray:
        """Weighted Delaunay triangles over the point indices."""
        return self.faces[self.real_faces]


def face_normals(lifted, faces):
    """Dual vertices of faces ``(a, b, c)`` of the lifted hull.

    The normal ``y`` satisfies ``<y, z_a> = <y, z_b> = <y, z_c>``; it is
    returned on the sheet when timelike, else scaled to unit spacelike norm
    and oriented so that ``<y, z_a> < 0``.
    """
    za = lifted[faces[:, 0]]
    zb = lifted[faces[:, 1]]
    zc = lifted[faces[:, 2]]
    y = np.cross(zb - za, zc - za)
    y[:, 2] *= -1.0
    nn = lorentz_inner(y, y)
    timelike = nn < 0
    scale = np.sqrt(np.abs(nn))
    scale[scale == 0] = 1.0
    y = y / scale[:, None]
    flip = np.where(timelike, y[:, 2] < 0, lorentz_inner(y, za) > 0)
    y[flip] *= -1.0
    return y, timelike


def build_hull(centers, heights, *, check: bool = True, order=None) -> ConvexHull:
    """Weighted Delaunay triangulation of the sites, as a lifted convex hull."""
    if check:
        centers, heights = check_sites(centers, heights)
    else:
        centers = np.asarray(centers, dtype=float)
        heights = np.asarray(heights, dtype=float)
    lifted = lifted_points(centers, heights)
    n = lifted.shape[0]
    if order is None:
        order = spatial_order(centers)
    tri, nbr, status, ok = _hull.build_hull(lifted, np.asarray(order, dtype=np.int64), PREDICATE_EPS)
    if ok == 1:
        raise DegenerateInputError("all sites lie on one geodesic")
    if ok != 0:
        raise GeometryError("hull construction did not terminate")
    normals = np.zeros((tri.shape[0], 3))
    timelike = np.zeros(tri.shape[0], dtype=bool)
    real = np.all(tri < n, axis=1)
    if np.any(real):
        normals[real], timelike[real] = face_normals(lifted, tri[real])
    return ConvexHull(lifted, tri, nbr, normals, timelike, status[:n] == _hull.HIDDEN)


def dual_vertex(hull: ConvexHull, face: int):
    """Dual vertex of a real face, on the sheet; raises if it is not timelike."""
    if np.any(hull.faces[face] >= hull.n_points):
        raise DegenerateInputError("ghost face has no dual vertex")
    if not hull.timelike[face]:
        raise DegenerateInputError("face has no power centre in the hyperbolic plane")
    return hull.normals[face]


@dataclass(frozen=True)
class PowerCenter:
    center: np.ndarray
    cosh_radius: float


def power_center(centers, heights) -> PowerCenter:
    """Point of equal power to three weighted sites, from a 3x3 linear solve."""
    centers = np.asarray(centers, dtype=float)
    heights = np.asarray(heights, dtype=float)
    if centers.shape != (3, 3):
        raise GeometryError("power_center takes exactly three sites")
    rows = centers @ np.diag([1.0, 1.0, -1.0])
    rhs = -np.exp(heights)
    # solve <x_i, w> = -exp(phi_i), then o = w / |w| and cosh R = 1 / |w|
    try:
        if abs(np.linalg.det(rows)) < 1e-14 * np.abs(rows).max() ** 3:
            raise np.linalg.LinAlgError
        w = np.linalg.solve(rows, rhs)
    except np.linalg.LinAlgError:
        raise DegenerateInputError("sites are collinear; no power centre") from None
    nn = -lorentz_inner(w, w)
    if not nn > 0 or w[2] <= 0:
        raise DegenerateInputError("power centre lies outside the hyperbolic plane")
    s = np.sqrt(nn)
    return PowerCenter(w / s, float(1.0 / s))


@dataclass
class PowerDiagram:
    """Cells of a weighted site set, with their dual triangulation.

    ``points`` are all centres used to build the triangulation; in planar
    mode these are the sites themselves, in surface mode translated copies
    with ``site_of_point`` mapping each copy to its site.  Cells exist for
    the ``n_sites`` canonical sites only.  Cell ``i`` has counterclockwise
    vertices ``cell_vertices[cell_offsets[i]:cell_offsets[i+1]]``; the edge
    leaving vertex ``m`` borders point ``edge_labels[m]`` (-1 on the domain
    boundary).
    """

    mode: str
    points: np.ndarray
    heights: np.ndarray
    site_of_point: np.ndarray
    n_sites: int
    hull: ConvexHull
    cell_offsets: np.ndarray
    cell_vertices: np.ndarray
    edge_labels: np.ndarray
    areas: np.ndarray = field(default=None)
    degenerate: np.ndarray = field(default=None)
    bounded: np.ndarray = field(default=None)
    domain: object = None

    def cell(self, i: int):
        lo, hi = self.cell_offsets[i], self.cell_offsets[i + 1]
        return self.cell_vertices[lo:hi], self.edge_labels[lo:hi]

    def cell_sizes(self) -> np.ndarray:
        return np.diff(self.cell_offsets)

    def edges(self):
        """Cell edges as arrays ``(cell, point, start, end)``, one row per polygon side."""
        sizes = self.cell_sizes()
        cell = np.repeat(np.arange(self.n_sites), sizes)
        start = self.cell_vertices
        nxt = np.arange(len(start)) + 1
        ends = self.cell_offsets[1:][cell]
        nxt = np.where(nxt == ends, self.cell_offsets[:-1][cell], nxt)
        return cell, self.edge_labels, start, self.cell_vertices[nxt]

    def adjacency(self, min_length: float = 0.0):
        """Sorted list of adjacent site pairs ``(i, j)`` with ``i < j``."""
        cell, lab, a, b = self.edges()
        keep = lab >= 0
        if min_length > 0:
            keep &= hyperbolic_distance(a, b) > min_length
        j = self.site_of_point[lab[keep]]
        i = cell[keep]
        pairs = {(int(min(u, v)), int(max(u, v))) for u, v in zip(i, j) if u != v}
        return sorted(pairs)

    def total_area(self) -> float:
        return float(self.areas.sum())


def polygon_areas(offsets, verts):
    """Areas of geodesic polygons in CSR form, by fans from the first vertex."""
    nc = len(offsets) - 1
    sizes = np.diff(offsets)
    if len(verts) == 0:
        return np.zeros(nc)
    cell = np.repeat(np.arange(nc), sizes)
    local = np.arange(len(verts)) - offsets[:-1][cell]
    # fan triangles (v0, v_k, v_k+1) for k = 1..size-2
    use = (local >= 1) & (local <= sizes[cell] - 2)
    idx = np.nonzero(use)[0]
    if len(idx) == 0:
        return np.zeros(nc)
    v0 = verts[offsets[:-1][cell[idx]]]
    area = signed_triangle_area(v0, verts[idx], verts[idx + 1])
    out = np.zeros(nc)
    np.add.at(out, cell[idx], area)
    return out


def cell_areas(diagram: PowerDiagram) -> np.ndarray:
    return polygon_areas(diagram.cell_offsets, diagram.cell_vertices)


def _finish(diagram: PowerDiagram, active):
    areas = cell_areas(diagram)
    diagram.areas = areas
    diagram.degenerate = (~active) | (areas < DEGENERATE_AREA) | (diagram.cell_sizes() < 3)
    return diagram


def build_power_diagram(centers, heights, domain=None, *, copies=None, check: bool = True) -> PowerDiagram:
    """Power diagram of weighted sites, clipped to ``domain`` or periodic.

    Planar mode takes a :class:`~hyperot.domain.ConvexDomain` (default: the
    hyperbolic convex hull of the centres).  Surface mode takes ``copies``,
    a :class:`~hyperot.fuchsian.CopySet` whose first ``n`` points are the
    canonical sites themselves.
    """
    centers = np.asarray(centers, dtype=float)
    heights = np.asarray(heights, dtype=float).reshape(-1)
    if copies is not None:
        return _surface_diagram(centers, heights, copies, check=check)
    from .domain import ConvexDomain

    if check:
        centers, heights = check_sites(centers, heights, min_sites=2)
    if domain is None:
        domain = ConvexDomain.hull_of(centers)
    n = centers.shape[0]
    lifted = lifted_points(centers, heights)
    hull = None
    active = np.ones(n, dtype=bool)
    if n >= 3:
        try:
            hull = build_hull(centers, heights, check=False)
        except DegenerateInputError:
            hull = None
    if hull is not None:
        ptr, idx = _cells.neighbour_lists(hull.faces, n)
        active = ~hull.hidden
    else:
        # collinear sites: clip against every other site
        ptr = np.arange(n + 1, dtype=np.int64) * (n - 1)
        idx = np.array([j for i in range(n) for j in range(n) if j != i], dtype=np.int64)
    off, verts, labels = _cells.clip_cells(lifted, ptr, idx, domain.vertices, active)
    diagram = PowerDiagram("planar", centers, heights, np.arange(n), n, hull, off, verts, labels)
    diagram.bounded = np.ones(n, dtype=bool)
    diagram.domain = domain
    return _finish(diagram, active & (np.diff(off) > 0))


def _surface_diagram(centers, heights, copies, check=True):
    n = centers.shape[0]
    pts = copies.points
    site = copies.site_of_point
    hull = build_hull(pts, heights[site], check=False)
    duals = hull.normals
    off, verts, labels, bounded = _cells.star_cells(
        hull.faces, hull.neighbors, duals, hull.timelike, np.arange(n, dtype=np.int64), pts.shape[0])
    active = ~hull.hidden[:n]
    diagram = PowerDiagram("surface", pts, heights, site, n, hull, off, verts, labels)
    diagram.bounded = bounded & active
    return _finish(diagram, active & bounded)


def edge_geometry(xi, phi_i, xj, phi_j, ya, yb):
    """Foot-point geometry of bisector edges between sites ``i`` and ``j``.

    Returns ``(gamma_i, gamma_j, d_k, d_l)``: signed distances from each
    centre to the foot ``q`` of the edge on the joining geodesic, and the
    signed lengths from ``q`` back to the edge start and on to the edge end,
    so that ``sinh(d_k) + sinh(d_l)`` is the edge's contribution.
    All inputs broadcast.
    """
    xi = np.asarray(xi, dtype=float)
    xj = np.asarray(xj, dtype=float)
    ya = np.asarray(ya, dtype=float)
    yb = np.asarray(yb, dtype=float)
    ri = np.exp(-np.asarray(phi_i, dtype=float))
    rj = np.exp(-np.asarray(phi_j, dtype=float))
    cd = np.maximum(-lorentz_inner(xi, xj), 1.0)
    dist = hyperbolic_distance(xi, xj)
    sd = np.sinh(dist)
    tanh_gi = (rj * cd - ri) / (rj * sd)
    tanh_gi = np.clip(tanh_gi, -1 + 1e-16, 1 - 1e-16)
    gi = np.arctanh(tanh_gi)
    gj = dist - gi
    # foot on the joining geodesic at signed distance gi from xi
    q = (np.sinh(gj)[..., None] * xi + np.sinh(gi)[..., None] * xj) / sd[..., None]
    q = normalize(q)
    normal = ri[..., None] * xi - rj[..., None] * xj
    t = lorentz_cross(normal, q)
    t = t / np.sqrt(lorentz_inner(t, t))[..., None]
    sa = np.arcsinh(lorentz_inner(ya, t))
    sb = np.arcsinh(lorentz_inner(yb, t))
    flip = sb < sa
    sa = np.where(flip, -sa, sa)
    sb = np.where(flip, -sb, sb)
    return gi, gj, -sa, sb


def hessian_edge_geometry(diagram: PowerDiagram, i: int, point: int):
    """Foot-point geometry of the edge of cell ``i`` bordering ``point``."""
    verts, labels = diagram.cell(i)
    hits = np.nonzero(labels == point)[0]
    if len(hits) == 0:
        raise GeometryError(f"cell {i} has no edge with point {point}")
    m = hits[0]
    ya = verts[m]
    yb = verts[(m + 1) % len(verts)]
    j = diagram.site_of_point[point]
    gi, gj, dk, dl = edge_geometry(diagram.points[i], diagram.heights[i],
                                   diagram.points[point], diagram.heights[j], ya, yb)
    return float(gi), float(gj), float(dk), float(dl)


def edge_weights(diagram: PowerDiagram):
    """Off-diagonal area derivatives per cell edge.

    Returns ``(i, j, w)`` with ``w = d omega_i / d phi_j <= 0`` for each edge of
    cell ``i`` bordering a copy of site ``j != i``.
    """
    cell, lab, ya, yb = diagram.edges()
    keep = lab >= 0
    cell, lab, ya, yb = cell[keep], lab[keep], ya[keep], yb[keep]
    site_j = diagram.site_of_point[lab]
    keep = site_j != cell
    cell, lab, ya, yb, site_j = cell[keep], lab[keep], ya[keep], yb[keep], site_j[keep]
    if len(cell) == 0:
        return cell, site_j, np.zeros(0)
    xi = diagram.points[cell]
    xj = diagram.points[lab]
    ri = np.exp(-diagram.heights[cell])
    rj = np.exp(-diagram.heights[site_j])
    cd = np.maximum(-lorentz_inner(xi, xj), 1.0)
    dist = hyperbolic_distance(xi, xj)
    sd = np.sinh(dist)
    tanh_gi = np.clip((rj * cd - ri) / (rj * sd), -1 + 1e-16, 1 - 1e-16)
    gi = np.arctanh(tanh_gi)
    gj = dist - gi
    normal = ri[:, None] * xi - rj[:, None] * xj
    # with t the unit tangent of the bisector at the foot q, an edge point at
    # signed distance s from q has <y, t> = sinh s
    q = (np.sinh(gj)[:, None] * xi + np.sinh(gi)[:, None] * xj) / sd[:, None]
    q = normalize(q)
    t = lorentz_cross(normal, q)
    t = t / np.sqrt(lorentz_inner(t, t))[:, None]
    span = np.abs(lorentz_inner(yb - ya, t))
    w = -span * np.cosh(gi) * np.cosh(gj) / sd
    return cell, site_j, w


def diagram_to_dict(diagram: PowerDiagram) -> dict:
    """Plain data dump: sites, cells in disk coordinates, adjacency."""
    cells = []
    for i in range(diagram.n_sites):
        verts, labels = diagram.cell(i)
        cells.append({
            "site": i,
            "vertices": hyperboloid_to_disk(verts).tolist(),
            "neighbors": [int(diagram.site_of_point[l]) if l >= 0 else -1 for l in labels],
            "area": float(diagram.areas[i]),
            "degenerate": bool(diagram.degenerate[i]),
        })
    return {
        "mode": diagram.mode,
        "sites": hyperboloid_to_disk(diagram.points[: diagram.n_sites]).tolist(),
        "heights": diagram.heights.tolist(),
        "cells": cells,
        "adjacency": [list(p) for p in diagram.adjacency()],
    }

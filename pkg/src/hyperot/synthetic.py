"""Synthetic hyperbolic surfaces and planar test data.

Closed surfaces are built from a geodesic 4g-gon with boundary word
``a1 b1 a1^-1 b1^-1 ...``: paired sides of equal length and interior angles
summing to 2 pi.  Each sector between the polygon centre and a side is split
into ``n * n`` triangles, and boundary points are glued so that the result is
a closed triangle mesh whose edge lengths are measured in the plane.
"""
from __future__ import annotations

import math

import numpy as np
from scipy.optimize import least_squares

from .fuchsian import MetricMesh
from .lorentz import (
    APEX,
    geodesic_point,
    hyperbolic_distance,
    lorentz_inner,
    polar_point,
)


def regular_polygon(genus: int) -> np.ndarray:
    """Corners of the regular 4g-gon with interior angle 2 pi / 4g."""
    n = 4 * genus
    alpha = 2 * math.pi / n
    radius = math.acosh(1.0 / (math.tan(math.pi / n) * math.tan(alpha / 2)))
    ang = 2 * math.pi * np.arange(n) / n
    return polar_point(np.full(n, radius), ang)


def interior_angles(corners) -> np.ndarray:
    p = np.asarray(corners, dtype=float)
    prev = np.roll(p, 1, axis=0)
    nxt = np.roll(p, -1, axis=0)

    def tangent(a, b):
        v = b + lorentz_inner(a, b)[:, None] * a
        return v / np.sqrt(lorentz_inner(v, v))[:, None]

    t1 = tangent(p, nxt)
    t2 = tangent(p, prev)
    return np.arccos(np.clip(lorentz_inner(t1, t2), -1.0, 1.0))


def side_lengths(corners) -> np.ndarray:
    p = np.asarray(corners, dtype=float)
    return hyperbolic_distance(p, np.roll(p, -1, axis=0))


def _pairing_residual(corners, genus):
    ls = side_lengths(corners)
    res = []
    for h in range(genus):
        k = 4 * h
        res.append(ls[k] - ls[k + 2])
        res.append(ls[k + 1] - ls[k + 3])
    res.append(interior_angles(corners).sum() - 2 * math.pi)
    return np.array(res)


def irregular_polygon(genus: int = 2, spread: float = 0.15, seed: int = 0) -> np.ndarray:
    """A perturbed 4g-gon that still satisfies the gluing conditions.

    Corners are moved at random in polar coordinates and then pulled back
    onto the constraint set (paired sides equal, angle sum 2 pi).
    """
    rng = np.random.default_rng(seed)
    n = 4 * genus
    base = regular_polygon(genus)
    r0 = np.arccosh(base[:, 2])
    a0 = 2 * np.pi * np.arange(n) / n
    x0 = np.concatenate([r0 * (1 + spread * rng.uniform(-1, 1, n)),
                         a0 + spread * (2 * np.pi / n) * rng.uniform(-0.5, 0.5, n)])

    def corners(x):
        return polar_point(x[:n], x[n:])

    sol = least_squares(lambda x: _pairing_residual(corners(x), genus), x0, xtol=1e-15, ftol=1e-15, gtol=1e-15)
    out = corners(sol.x)
    if np.abs(_pairing_residual(out, genus)).max() > 1e-11:
        raise RuntimeError("could not satisfy the gluing conditions")
    k = np.stack([out[:, 0] / out[:, 2], out[:, 1] / out[:, 2]], axis=1)
    e = np.roll(k, -1, axis=0) - k
    turn = e[:, 0] * np.roll(e, -1, axis=0)[:, 1] - e[:, 1] * np.roll(e, -1, axis=0)[:, 0]
    if np.any(turn <= 0):
        raise RuntimeError("perturbed polygon is not convex; lower the spread")
    return out


def side_labels(genus: int) -> list:
    out = []
    for h in range(1, genus + 1):
        out += [f"a{h}", f"b{h}", f"a{h}^-1", f"b{h}^-1"]
    return out


def polygon_surface(corners, genus: int, n: int = 4, centre=None):
    """Closed metric mesh glued from a fundamental polygon.

    Returns ``(mesh, positions)`` where ``positions[f, k]`` is the planar
    position of corner ``k`` of face ``f`` inside the polygon.
    """
    if n < 3:
        raise ValueError("need at least three subdivisions per side")
    corners = np.asarray(corners, dtype=float)
    m = 4 * genus
    if len(corners) != m:
        raise ValueError("polygon must have 4g corners")
    c = APEX if centre is None else np.asarray(centre, dtype=float)
    ids = {}

    def vid(key):
        if key not in ids:
            ids[key] = len(ids)
        return ids[key]

    def key_of(k, r, j):
        """Identification key of point ``j`` on row ``r`` of sector ``k``."""
        if r == 0:
            return ("c",)
        if j == 0:
            return ("s", k, r) if r < n else ("P",)
        if j == r:
            return ("s", (k + 1) % m, r) if r < n else ("P",)
        if r < n:
            return ("i", k, r, j)
        # boundary side k; primed sides reuse the partner's points in reverse
        if (k % 4) < 2:
            return ("e", k, j)
        return ("e", k - 2, n - j)

    faces = []
    fpos = []
    cvid = vid(("c",))
    vid(("P",))
    for k in range(m):
        a, b = corners[k], corners[(k + 1) % m]
        rows = [np.array([c])]
        for r in range(1, n + 1):
            sa = geodesic_point(c, a, r / n)
            sb = geodesic_point(c, b, r / n)
            t = np.arange(r + 1) / r
            rows.append(geodesic_point(np.broadcast_to(sa, (r + 1, 3)), np.broadcast_to(sb, (r + 1, 3)), t))
        for r in range(1, n + 1):
            for j in range(r):
                tri = [(r - 1, j), (r, j), (r, j + 1)]
                faces.append([vid(key_of(k, rr, jj)) for rr, jj in tri])
                fpos.append([rows[rr][jj] for rr, jj in tri])
                if j < r - 1:
                    tri = [(r - 1, j), (r, j + 1), (r - 1, j + 1)]
                    faces.append([vid(key_of(k, rr, jj)) for rr, jj in tri])
                    fpos.append([rows[rr][jj] for rr, jj in tri])
    faces = np.array(faces)
    fpos = np.array(fpos)
    assert cvid == 0
    lengths = {}
    for f, row in enumerate(faces):
        for u in range(3):
            v = (u + 1) % 3
            key = (min(row[u], row[v]), max(row[u], row[v]))
            d = float(hyperbolic_distance(fpos[f, u], fpos[f, v]))
            if key in lengths and abs(lengths[key] - d) > 1e-9:
                raise RuntimeError(f"glued edge {key} has mismatched lengths")
            lengths.setdefault(key, d)
    labels = side_labels(genus)
    boundary = []
    for k in range(m):
        path = [vid(key_of(k, n, j)) for j in range(n + 1)]
        boundary.append((labels[k], path))
    edges = np.array(sorted(lengths))
    mesh = MetricMesh(faces, edges, np.array([lengths[tuple(e)] for e in edges]), genus, boundary)
    return mesh, fpos


def regular_surface(genus: int = 2, n: int = 4):
    """Metric mesh of the regular 4g-gon surface; ``4 n^2 - 2`` vertices at genus 2."""
    mesh, _ = polygon_surface(regular_polygon(genus), genus, n)
    return mesh


def irregular_surface(genus: int = 2, n: int = 4, spread: float = 0.15, seed: int = 0):
    mesh, _ = polygon_surface(irregular_polygon(genus, spread, seed), genus, n)
    return mesh


def hex_disk_points(rings: int = 4, spacing: float = 0.2) -> np.ndarray:
    """Triangular-lattice points in the disk: ``1 + 3 r (r + 1)`` points.

    Ring ``r`` is the hexagon of circumradius ``r * spacing`` with ``r``
    points per side, so neighbouring points are ``spacing`` apart.
    """
    pts = [np.zeros(2)]
    for r in range(1, rings + 1):
        for side in range(6):
            a0 = side * math.pi / 3
            a1 = (side + 1) * math.pi / 3
            p0 = r * spacing * np.array([math.cos(a0), math.sin(a0)])
            p1 = r * spacing * np.array([math.cos(a1), math.sin(a1)])
            for j in range(r):
                pts.append(p0 + (p1 - p0) * j / r)
    return np.array(pts)


def lattice_triangles(points) -> np.ndarray:
    """Counterclockwise Delaunay triangles of planar points."""
    from scipy.spatial import Delaunay
    tri = Delaunay(np.asarray(points, dtype=float)).simplices
    p = np.asarray(points)[tri]
    cross = (p[:, 1, 0] - p[:, 0, 0]) * (p[:, 2, 1] - p[:, 0, 1]) - (p[:, 1, 1] - p[:, 0, 1]) * (p[:, 2, 0] - p[:, 0, 0])
    tri[cross < 0] = tri[cross < 0][:, ::-1]
    return tri

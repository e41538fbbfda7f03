"""Geodesically convex polygons used as planar transport domains."""
from __future__ import annotations

import numpy as np
from scipy.spatial import ConvexHull as _QHull

from .errors import DegenerateInputError, GeometryError
from .lorentz import (
    check_hpoint,
    hyperboloid_to_klein,
    klein_to_hyperboloid,
    signed_triangle_area,
)


class ConvexDomain:
    """Geodesically convex polygon, vertices counterclockwise on the sheet.

    Geodesics are straight chords in the Klein model, so convexity and
    membership are decided there.
    """

    def __init__(self, vertices, check: bool = True):
        v = np.array(vertices, dtype=float)
        if check:
            check_hpoint(v)
            if v.ndim != 2 or v.shape[0] < 3:
                raise GeometryError("a domain needs at least three vertices")
            k = hyperboloid_to_klein(v)
            e = np.roll(k, -1, axis=0) - k
            turn = e[:, 0] * np.roll(e, -1, axis=0)[:, 1] - e[:, 1] * np.roll(e, -1, axis=0)[:, 0]
            if np.any(turn < -1e-14):
                raise GeometryError("domain polygon must be convex and counterclockwise")
        v.setflags(write=False)
        self.vertices = v

    @classmethod
    def hull_of(cls, points) -> "ConvexDomain":
        """Hyperbolic convex hull of points on the sheet."""
        pts = np.asarray(points, dtype=float)
        k = hyperboloid_to_klein(pts)
        if len(pts) < 3:
            raise DegenerateInputError("hull of fewer than three points has no area")
        try:
            h = _QHull(k)
        except Exception as exc:
            raise DegenerateInputError("points lie on one geodesic") from exc
        # qhull lists 2-d hull vertices counterclockwise
        return cls(pts[h.vertices], check=False)

    @classmethod
    def from_disk(cls, disk_vertices) -> "ConvexDomain":
        from .lorentz import disk_to_hyperboloid
        return cls(disk_to_hyperboloid(np.asarray(disk_vertices, dtype=float)))

    @property
    def klein(self) -> np.ndarray:
        return hyperboloid_to_klein(self.vertices)

    def area(self) -> float:
        v = self.vertices
        return float(np.sum(signed_triangle_area(v[0], v[1:-1], v[2:])))

    def contains(self, points, tol: float = 0.0) -> np.ndarray:
        """Membership of points on the sheet (boundary counts as inside)."""
        k = hyperboloid_to_klein(np.atleast_2d(points))
        a = self.klein
        b = np.roll(a, -1, axis=0)
        e = b - a
        rel = k[:, None, :] - a[None, :, :]
        cross = e[None, :, 0] * rel[..., 1] - e[None, :, 1] * rel[..., 0]
        return np.all(cross >= -tol, axis=1)

    def sample(self, count: int, rng) -> np.ndarray:
        """Uniform samples of the hyperbolic area measure, by rejection in Klein."""
        k = self.klein
        lo, hi = k.min(axis=0), k.max(axis=0)
        r2max = float(np.max(np.sum(k * k, axis=1)))
        # area density in Klein coordinates is (1 - |k|^2)^(-3/2)
        dmax = (1.0 - r2max) ** -1.5
        out = []
        have = 0
        while have < count:
            m = max(2 * (count - have), 1024)
            cand = lo + (hi - lo) * rng.random((m, 2))
            r2 = np.sum(cand * cand, axis=1)
            ok = r2 < 1.0
            cand, r2 = cand[ok], r2[ok]
            dens = (1.0 - r2) ** -1.5
            acc = rng.random(len(cand)) * dmax < dens
            cand = cand[acc]
            pts = klein_to_hyperboloid(cand)
            pts = pts[self.contains(pts)]
            out.append(pts)
            have += len(pts)
        return np.concatenate(out)[:count]

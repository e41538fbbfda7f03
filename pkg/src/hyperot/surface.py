"""Transport problems on closed hyperbolic surfaces.

Sites live in a fundamental domain.  The power diagram is built from the
sites together with their translates under the group elements whose tiles
come within a collar distance of the domain; the cells of the canonical
copies are then the cells on the surface.  A cheap bound certifies that no
omitted translate could claim any part of a canonical cell, and the collar
grows until the bound holds.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import InsufficientTilingError, OutOfPatchError
from .fuchsian import (
    FuchsianGroup,
    FundamentalDomain,
    build_tiling,
    collar_tiles,
    covering_reduce,
    side_pairing_generators,
)
from ._cells import within_collar
from .lorentz import check_hpoint, hyperbolic_distance, lorentz_inner, normalize
from .power_diagram import PowerDiagram, build_power_diagram


@dataclass
class CopySet:
    """Translates of the sites: ``points[k] = elements[element[k]] x[site_of_point[k]]``.

    The first ``n`` points are the canonical sites in order.
    """

    points: np.ndarray
    site_of_point: np.ndarray
    element: np.ndarray
    elements: list
    collar: float


def make_copies(sites, group: FuchsianGroup, dom: FundamentalDomain, collar: float) -> CopySet:
    """Sites plus every translate within ``collar`` of the domain.

    A translate ``g x`` with ``g`` not the identity lies in the tile ``g D``,
    outside the interior of ``D``, so its distance to ``D`` is its distance
    to the boundary polygon.  That distance is at least the distance from
    ``x`` to the boundary, which rules out most sites at once.
    """
    sites = np.asarray(sites, dtype=float)
    n = len(sites)
    elements, _ = collar_tiles(group, dom, collar)
    poly = np.ascontiguousarray(dom.polygon)
    movable = np.nonzero(within_collar(np.ascontiguousarray(sites), poly, collar))[0]
    centre = dom.center()
    reach = float(hyperbolic_distance(sites[movable], centre).max()) + collar if len(movable) else 0.0
    pts = [sites]
    owner = [np.arange(n)]
    elem = [np.zeros(n, dtype=np.int64)]
    mats = np.array([g.matrix for g in elements[1:]])
    if len(movable) and len(mats):
        img = normalize(np.einsum("tij,mj->tmi", mats, sites[movable]))
        tile = np.repeat(np.arange(1, len(elements)), len(movable))
        site = np.tile(movable, len(mats))
        img = img.reshape(-1, 3)
        # cosh d(g x, c) > cosh(reach) cannot be near the domain
        near = -lorentz_inner(img, centre) <= math.cosh(reach)
        img, tile, site = img[near], tile[near], site[near]
        close = within_collar(np.ascontiguousarray(img), poly, collar)
        pts.append(img[close])
        owner.append(site[close])
        elem.append(tile[close])
    return CopySet(np.concatenate(pts), np.concatenate(owner), np.concatenate(elem), elements, collar)


def certify(diagram: PowerDiagram, collar: float) -> np.ndarray:
    """Cells that a translate farther than ``collar`` from the domain could still reach.

    Any omitted copy ``q`` has ``d(y, q) > collar - d(y, x_i)`` at a vertex
    ``y`` of cell ``i``, so its power there is at least
    ``exp(-max phi) cosh(collar - d(y, x_i))``.  Powers are affine in Klein
    coordinates, so exceeding the cell's own power at every vertex rules the
    copy out on the whole (convex) cell.
    """
    n = diagram.n_sites
    phi = diagram.heights
    sizes = np.diff(diagram.cell_offsets)
    cell = np.repeat(np.arange(n), sizes)
    y = diagram.cell_vertices
    x = diagram.points[cell]
    ch = np.maximum(-lorentz_inner(x, y), 1.0)
    own = np.exp(-phi[cell]) * ch
    dist = np.arccosh(ch)
    bound = math.exp(-float(phi.max())) * np.cosh(np.maximum(collar - dist, 0.0))
    bad_vertex = bound <= own * (1.0 + 1e-9)
    bad = np.zeros(n, dtype=bool)
    np.logical_or.at(bad, cell, bad_vertex)
    return bad | ~diagram.bounded


class SurfaceProblem:
    """One site per mesh vertex (or given sites) on a closed surface."""

    mode = "surface"

    def __init__(self, dom: FundamentalDomain, group: FuchsianGroup | None = None, sites=None,
                 collar: float | None = None, max_collar: float | None = None):
        self.domain = dom
        self.group = group if group is not None else side_pairing_generators(dom)
        self.centers = check_hpoint(np.asarray(dom.vertex_positions if sites is None else sites, dtype=float))
        self.n_sites = len(self.centers)
        self.genus = dom.genus
        spacing = math.sqrt(self.total_area() / self.n_sites)
        self.collar = collar if collar is not None else max(0.3, 4.0 * spacing)
        self.max_collar = max_collar if max_collar is not None else 2.0 * dom.radius() + 2.0
        self._copies = {}
        self._patch = None
        self.last_collar = self.collar

    def total_area(self) -> float:
        return 2 * math.pi * (2 * self.genus - 2)

    def copies(self, collar: float) -> CopySet:
        key = round(collar, 12)
        if key not in self._copies:
            self._copies[key] = make_copies(self.centers, self.group, self.domain, collar)
        return self._copies[key]

    def diagram(self, heights) -> PowerDiagram:
        heights = np.asarray(heights, dtype=float).reshape(self.n_sites)
        collar = self.collar
        while True:
            cs = self.copies(collar)
            d = build_power_diagram(self.centers, heights, copies=cs, check=False)
            bad = certify(d, collar)
            if not bad.any():
                self.last_collar = collar
                d.domain = self.domain
                return d
            # more copies only shrink cells, so an empty cell stays empty
            if collar >= self.max_collar or d.degenerate.any():
                # treat as inadmissible so a damped caller backs off
                d.degenerate = d.degenerate | bad
                return d
            collar = min(collar * 1.5, self.max_collar)

    def patch(self):
        if self._patch is None:
            self._patch = build_tiling(self.group, self.domain)
        return self._patch

    def reduce(self, x):
        """Representative in the closed domain of points on the sheet."""
        pts, _ = covering_reduce(self.patch(), self.domain, x)
        return pts

    def locate(self, x, heights) -> int:
        y = self.reduce(np.asarray(x, dtype=float))[0]
        heights = np.asarray(heights, dtype=float)
        cs = self.copies(self.last_collar)
        vals = np.exp(-heights[cs.site_of_point]) * -lorentz_inner(cs.points, y)
        best = vals.min()
        k = int(np.nonzero(vals <= best * (1.0 + 1e-12))[0][0])
        return int(cs.site_of_point[k])


def surface_problem(mesh, collar=None) -> SurfaceProblem:
    """Embed a metric mesh, centre its domain and set up the problem."""
    from .fuchsian import embed_domain
    dom = embed_domain(mesh).recentred()
    return SurfaceProblem(dom, collar=collar)


__all__ = ["CopySet", "SurfaceProblem", "certify", "make_copies", "surface_problem",
           "InsufficientTilingError", "OutOfPatchError"]

"""Fundamental domains of closed hyperbolic surfaces and their tilings.

A surface is given as a triangle mesh with hyperbolic edge lengths and a cut
graph whose boundary word reads ``a1 b1 a1^-1 b1^-1 ...``.  Cutting along the
graph gives a disk that is laid out face by face in the hyperboloid model.
Paired boundary sides are related by Lorentz isometries which generate the
deck group; finite sets of group elements tile a neighbourhood of the domain.
"""
from __future__ import annotations

import math
import re
from collections import deque
from dataclasses import dataclass, field

import numpy as np

from scipy.spatial import cKDTree

from .errors import (
    EmbeddingDriftError,
    InsufficientTilingError,
    MetricError,
    OutOfPatchError,
    PairingError,
)
from .lorentz import (
    LorentzIsometry,
    SIGNATURE,
    hyperbolic_distance,
    hyperboloid_to_disk,
    hyperboloid_to_klein,
    lorentz_inner,
    normalize,
    polar_point,
    signed_triangle_area,
    triangle_areas,
    unit_tangent,
)

_LABEL = re.compile(r"^([A-Za-z]+)(\d+)(\^-1|')?$")


def parse_label(label: str):
    """``'a1' -> ('a1', False)``, ``'a1^-1' -> ('a1', True)``."""
    m = _LABEL.match(label.strip())
    if not m:
        raise MetricError(f"bad boundary label {label!r}")
    return m.group(1) + m.group(2), m.group(3) is not None


def inverse_label(label: str) -> str:
    base, inv = parse_label(label)
    return base if inv else base + "^-1"


@dataclass
class MetricMesh:
    """Closed triangle mesh with hyperbolic edge lengths and a cut graph.

    ``faces`` are counterclockwise vertex triples, ``edges``/``lengths`` list
    each undirected edge once.  ``boundary`` is the cut-open boundary as
    ``(label, vertex path)`` pairs in counterclockwise order; a side labelled
    ``x^-1`` runs along the same mesh edges as side ``x`` in reverse.
    ``positions`` optionally carries the vertices' coordinates in some other
    geometry (for instance the original 3-d surface).
    """

    faces: np.ndarray
    edges: np.ndarray
    lengths: np.ndarray
    genus: int
    boundary: list
    positions: np.ndarray | None = None
    _lookup: dict = field(default=None, repr=False)

    def __post_init__(self):
        self.faces = np.asarray(self.faces, dtype=np.int64)
        self.edges = np.asarray(self.edges, dtype=np.int64)
        self.lengths = np.asarray(self.lengths, dtype=float)
        self.boundary = [(str(lab), [int(v) for v in path]) for lab, path in self.boundary]
        nv = int(max(self.faces.max(), self.edges.max())) + 1
        lo = np.minimum(self.edges[:, 0], self.edges[:, 1])
        hi = np.maximum(self.edges[:, 0], self.edges[:, 1])
        keys = lo * nv + hi
        order = np.argsort(keys, kind="stable")
        if np.any(np.diff(keys[order]) == 0):
            k = order[np.nonzero(np.diff(keys[order]) == 0)[0][0]]
            raise MetricError(f"edge {tuple(self.edges[k])} listed twice")
        self._lookup = (nv, keys[order], order)

    @property
    def n_vertices(self) -> int:
        return int(self.faces.max()) + 1

    def edge_index(self, u, v) -> np.ndarray:
        nv, keys, order = self._lookup
        u = np.asarray(u, dtype=np.int64)
        v = np.asarray(v, dtype=np.int64)
        q = np.minimum(u, v) * nv + np.maximum(u, v)
        pos = np.clip(np.searchsorted(keys, q), 0, len(keys) - 1)
        bad = keys[pos] != q
        if np.any(bad):
            b = np.nonzero(np.atleast_1d(bad))[0][0]
            raise MetricError(f"no length for edge ({np.atleast_1d(u)[b]}, {np.atleast_1d(v)[b]})")
        return order[pos]

    def edge_length(self, u: int, v: int) -> float:
        return float(self.lengths[self.edge_index(u, v)])

    def face_lengths(self) -> np.ndarray:
        """Lengths ``L[f, k]`` of the edge opposite corner ``k`` of face ``f``."""
        f = self.faces
        return np.stack([self.lengths[self.edge_index(f[:, 1], f[:, 2])],
                         self.lengths[self.edge_index(f[:, 2], f[:, 0])],
                         self.lengths[self.edge_index(f[:, 0], f[:, 1])]], axis=1)

    def face_areas(self) -> np.ndarray:
        return triangle_areas(self.face_lengths())

    def validate(self, area_rtol: float = 1e-6):
        if self.genus < 2:
            raise MetricError("genus must be at least 2")
        if not np.all(self.lengths > 0):
            raise MetricError("edge lengths must be positive")
        lf = self.face_lengths()
        s = lf.sum(axis=1)
        if np.any(2 * lf.max(axis=1) >= s * (1 - 1e-12)):
            f = int(np.argmax(2 * lf.max(axis=1) - s))
            raise MetricError(f"face {f} violates the triangle inequality")
        nv, ne, nf = self.n_vertices, len(self.edges), len(self.faces)
        if nv - ne + nf != 2 - 2 * self.genus:
            raise MetricError(f"Euler characteristic {nv - ne + nf} does not match genus {self.genus}")
        total = float(self.face_areas().sum())
        expect = 2 * math.pi * (2 * self.genus - 2)
        if abs(total - expect) > area_rtol * expect:
            raise MetricError(f"total area {total!r} differs from {expect!r}")
        if len(self.boundary) != 4 * self.genus:
            raise MetricError(f"expected {4 * self.genus} boundary sides, got {len(self.boundary)}")
        labels = {lab for lab, _ in self.boundary}
        for lab, path in self.boundary:
            partner = inverse_label(lab)
            if partner not in labels:
                raise MetricError(f"side {lab} has no partner")
        return self

    @classmethod
    def from_faces(cls, faces, lengths_fn, genus, boundary, positions=None):
        """Build the edge list from faces, measuring each edge with ``lengths_fn(u, v)``."""
        faces = np.asarray(faces, dtype=np.int64)
        pairs = np.sort(np.concatenate([faces[:, [0, 1]], faces[:, [1, 2]], faces[:, [2, 0]]]), axis=1)
        edges = np.unique(pairs, axis=0)
        lengths = np.array([lengths_fn(int(u), int(v)) for u, v in edges])
        return cls(faces, edges, lengths, genus, boundary, positions)


class _UnionFind:
    def __init__(self, n):
        self.parent = np.arange(n)

    def find(self, a):
        p = self.parent
        root = a
        while p[root] != root:
            root = p[root]
        while p[a] != root:
            p[a], a = root, p[a]
        return root

    def union(self, a, b):
        ra, rb = self.find(a), self.find(b)
        if ra != rb:
            self.parent[max(ra, rb)] = min(ra, rb)


@dataclass
class Side:
    label: str
    copies: np.ndarray
    positions: np.ndarray

    @property
    def start(self):
        return self.positions[0]

    @property
    def end(self):
        return self.positions[-1]


@dataclass
class FundamentalDomain:
    """Cut-open surface laid out in the hyperboloid model.

    Every mesh vertex on the cut has several copies; ``corner_copy[f, k]``
    names the copy used by corner ``k`` of face ``f``.  ``boundary`` lists the
    boundary copies counterclockwise and ``sides`` the labelled sides.
    """

    mesh: MetricMesh
    corner_copy: np.ndarray
    copy_vertex: np.ndarray
    copy_pos: np.ndarray
    sides: list
    boundary: np.ndarray
    vertex_rep: np.ndarray

    @property
    def genus(self) -> int:
        return self.mesh.genus

    @property
    def vertex_positions(self) -> np.ndarray:
        """One representative position per mesh vertex."""
        return self.copy_pos[self.vertex_rep]

    @property
    def polygon(self) -> np.ndarray:
        return self.copy_pos[self.boundary]

    def side(self, label: str) -> Side:
        for s in self.sides:
            if s.label == label:
                return s
        raise KeyError(label)

    def corners(self) -> np.ndarray:
        return np.array([s.start for s in self.sides])

    def area(self) -> float:
        p = self.polygon
        return float(np.sum(signed_triangle_area(p[0], p[1:-1], p[2:])))

    def center(self) -> np.ndarray:
        return normalize(self.polygon.sum(axis=0))

    def radius(self) -> float:
        return float(hyperbolic_distance(self.polygon, self.center()).max())

    def contains(self, points, tol: float = 1e-12) -> np.ndarray:
        """Closed membership test (crossing number in Klein coordinates)."""
        return _in_polygon(hyperboloid_to_klein(np.atleast_2d(points)), hyperboloid_to_klein(self.polygon), tol)

    def distance_to(self, points) -> np.ndarray:
        """Hyperbolic distance to the closed domain (zero inside)."""
        pts = np.atleast_2d(points)
        out = boundary_distance(pts, self.polygon)
        out[self.contains(pts)] = 0.0
        return out

    def transformed(self, g: LorentzIsometry) -> "FundamentalDomain":
        return FundamentalDomain(self.mesh, self.corner_copy, self.copy_vertex, g.apply(self.copy_pos),
                                 [Side(s.label, s.copies, g.apply(s.positions)) for s in self.sides],
                                 self.boundary, self.vertex_rep)

    def recentred(self) -> "FundamentalDomain":
        """Copy moved by the boost that takes its centre to the apex."""
        return self.transformed(LorentzIsometry.translation_to(self.center()).inverse())

    def embedded_length_error(self) -> float:
        m = self.mesh
        lf = m.face_lengths()
        p = self.copy_pos[self.corner_copy]
        err = 0.0
        for k in range(3):
            a, b = (k + 1) % 3, (k + 2) % 3
            d = hyperbolic_distance(p[:, a], p[:, b])
            err = max(err, float(np.abs(d - lf[:, k]).max()))
        return err


def _in_polygon(k, poly, tol=1e-12):
    """Points ``k`` (m, 2) in or on the closed polygon ``poly`` (e, 2)."""
    a = poly
    b = np.roll(poly, -1, axis=0)
    out = np.zeros(len(k), dtype=bool)
    chunk = max(1, 2_000_000 // max(len(poly), 1))
    for s in range(0, len(k), chunk):
        x = k[s:s + chunk, None, 0]
        y = k[s:s + chunk, None, 1]
        cond = (a[None, :, 1] > y) != (b[None, :, 1] > y)
        with np.errstate(divide="ignore", invalid="ignore"):
            xcross = a[None, :, 0] + (y - a[None, :, 1]) * (b[None, :, 0] - a[None, :, 0]) / (b[None, :, 1] - a[None, :, 1])
        inside = (np.count_nonzero(cond & (x < xcross), axis=1) % 2) == 1
        # points on an edge count as inside
        ex = b[None, :, 0] - a[None, :, 0]
        ey = b[None, :, 1] - a[None, :, 1]
        rx = x - a[None, :, 0]
        ry = y - a[None, :, 1]
        cross = ex * ry - ey * rx
        dot = ex * rx + ey * ry
        len2 = ex * ex + ey * ey
        on = (np.abs(cross) <= tol * np.sqrt(len2)) & (dot >= -tol) & (dot <= len2 + tol)
        out[s:s + chunk] = inside | on.any(axis=1)
    return out


def boundary_distance(points, polygon) -> np.ndarray:
    """Distance from points to a closed geodesic polyline (vectorized)."""
    pts = np.atleast_2d(points)
    a = polygon
    b = np.roll(polygon, -1, axis=0)
    out = np.full(len(pts), np.inf)
    chunk = max(1, 1_000_000 // max(len(a), 1))
    for s in range(0, len(pts), chunk):
        p = pts[s:s + chunk, None, :]
        out[s:s + chunk] = _segment_distance(p, a[None], b[None]).min(axis=1)
    return out


def _segment_distance(p, a, b):
    # normal of the geodesic through a and b, as a unit spacelike vector
    n = np.cross(a, b)
    n[..., 2] *= -1.0
    n = n / np.sqrt(np.maximum(lorentz_inner(n, n), 1e-300))[..., None]
    s = lorentz_inner(p, n)
    # foot of the perpendicular: p - s n, renormalized
    foot = p - s[..., None] * n
    q = -lorentz_inner(foot, foot)
    foot = foot / np.sqrt(np.maximum(q, 1e-300))[..., None]
    # the foot lies on the segment iff it is on the far side of a from b and vice versa
    ta = -lorentz_inner(foot, a)
    tb = -lorentz_inner(foot, b)
    tab = -lorentz_inner(a, b)
    # cosh d(a,f) and cosh d(f,b) both at most cosh d(a,b) for f between a and b
    inside = (ta <= tab * (1 + 1e-14)) & (tb <= tab * (1 + 1e-14))
    d_line = np.abs(np.arcsinh(s))
    da = np.arccosh(np.maximum(-lorentz_inner(p, a), 1.0))
    db = np.arccosh(np.maximum(-lorentz_inner(p, b), 1.0))
    return np.where(inside, d_line, np.minimum(da, db))


def _third_vertex(c1, r1, c2, r2, faces):
    """Left intersection of circles about ``c1`` and ``c2`` (vectorized)."""
    g = np.maximum(-lorentz_inner(c1, c2), 1.0)
    ch1, ch2 = np.cosh(r1), np.cosh(r2)
    den = 1.0 - g * g
    with np.errstate(divide="ignore", invalid="ignore"):
        alpha = (ch1 - g * ch2) / den
        beta = (ch2 - g * ch1) / den
    n = np.cross(c1, c2)
    n[:, 2] *= -1.0
    base = alpha[:, None] * c1 + beta[:, None] * c2
    with np.errstate(divide="ignore", invalid="ignore"):
        t2 = (-1.0 - lorentz_inner(base, base)) / lorentz_inner(n, n)
    bad = ~(t2 > 0)
    if bad.any():
        raise MetricError(f"face {int(faces[np.nonzero(bad)[0][0]])} cannot be laid out")
    # <n, p> = det[c1, c2, p], positive on the left
    return normalize(base + np.sqrt(t2)[:, None] * n)


def embed_domain(mesh: MetricMesh, drift_tol: float = 1e-5, check: bool = True) -> FundamentalDomain:
    """Lay the cut-open mesh out face by face, breadth first from a face at vertex 0."""
    if check:
        mesh.validate()
    faces = mesh.faces
    nf = len(faces)
    half = {}
    for f, (a, b, c) in enumerate(faces):
        for u, v in ((a, b), (b, c), (c, a)):
            if (u, v) in half:
                raise MetricError(f"directed edge ({u}, {v}) used by two faces; orientation is inconsistent")
            half[(int(u), int(v))] = f
    cut = set()
    for _, path in mesh.boundary:
        for u, v in zip(path[:-1], path[1:]):
            cut.add((min(u, v), max(u, v)))
    # corners joined across uncut edges are the same copy
    uf = _UnionFind(3 * nf)
    for f, row in enumerate(faces):
        for k in range(3):
            u, v = int(row[k]), int(row[(k + 1) % 3])
            if (min(u, v), max(u, v)) in cut:
                continue
            g = half.get((v, u))
            if g is None:
                raise MetricError(f"edge ({u}, {v}) is on an open boundary")
            kg_u = int(np.nonzero(faces[g] == u)[0][0])
            kg_v = int(np.nonzero(faces[g] == v)[0][0])
            uf.union(3 * f + k, 3 * g + kg_u)
            uf.union(3 * f + (k + 1) % 3, 3 * g + kg_v)
    roots = np.array([uf.find(i) for i in range(3 * nf)])
    uniq, copy_of = np.unique(roots, return_inverse=True)
    corner_copy = copy_of.reshape(nf, 3)
    ncopy = len(uniq)
    copy_vertex = np.empty(ncopy, dtype=np.int64)
    copy_vertex[corner_copy.ravel()] = faces.ravel()
    pos = np.full((ncopy, 3), np.nan)
    placed = np.zeros(ncopy, dtype=bool)

    lengths = mesh.face_lengths()
    seed = int(np.nonzero(np.any(faces == 0, axis=1))[0][0])
    k0 = int(np.nonzero(faces[seed] == 0)[0][0])
    order = [k0, (k0 + 1) % 3, (k0 + 2) % 3]
    c0, c1, c2 = (corner_copy[seed, k] for k in order)
    l01 = lengths[seed, order[2]]
    l02 = lengths[seed, order[1]]
    l12 = lengths[seed, order[0]]
    pos[c0] = (0.0, 0.0, 1.0)
    pos[c1] = (math.sinh(l01), 0.0, math.cosh(l01))
    cos_theta = (math.cosh(l01) * math.cosh(l02) - math.cosh(l12)) / (math.sinh(l01) * math.sinh(l02))
    theta = math.acos(max(-1.0, min(1.0, cos_theta)))
    pos[c2] = polar_point(l02, theta)
    placed[[c0, c1, c2]] = True

    # neighbour across the uncut edge leaving corner k of each face, or -1
    across = np.full((nf, 3), -1, dtype=np.int64)
    for f, row in enumerate(faces):
        for k in range(3):
            u, v = int(row[k]), int(row[(k + 1) % 3])
            if (min(u, v), max(u, v)) not in cut:
                across[f, k] = half[(v, u)]
    visited = np.zeros(nf, dtype=bool)
    visited[seed] = True
    frontier = np.array([seed])
    worst = 0.0
    while len(frontier):
        # faces reached in this layer, each from the first parent that sees it
        parent = np.repeat(frontier, 3)
        kk = np.tile(np.arange(3), len(frontier))
        g = across[frontier].ravel()
        ok = g >= 0
        parent, kk, g = parent[ok], kk[ok], g[ok]
        ok = ~visited[g]
        parent, kk, g = parent[ok], kk[ok], g[ok]
        g, first = np.unique(g, return_index=True)
        parent, kk = parent[first], kk[first]
        if len(g) == 0:
            break
        visited[g] = True
        v = faces[parent, (kk + 1) % 3]
        # g runs v -> u -> w counterclockwise; w sits left of v -> u
        kg = np.argmax(faces[g] == v[:, None], axis=1)
        cv = corner_copy[g, kg]
        cu = corner_copy[g, (kg + 1) % 3]
        cw = corner_copy[g, (kg + 2) % 3]
        lv = lengths[g, (kg + 1) % 3]
        lu = lengths[g, kg]
        p = _third_vertex(pos[cv], lv, pos[cu], lu, g)
        seen = placed[cw]
        if seen.any():
            worst = max(worst, float(hyperbolic_distance(p[seen], pos[cw[seen]]).max()))
        fresh = np.nonzero(~seen)[0]
        cw_f, idx = np.unique(cw[fresh], return_index=True)
        pos[cw_f] = p[fresh[idx]]
        placed[cw_f] = True
        if len(fresh) > len(idx):
            worst = max(worst, float(hyperbolic_distance(p[fresh], pos[cw[fresh]]).max()))
        frontier = g
    if not visited.all():
        raise MetricError("cut-open mesh is not connected")
    if worst > drift_tol:
        raise EmbeddingDriftError(f"embedding drift {worst:.3e} exceeds {drift_tol:.1e}")

    # orientation of every laid-out face
    p = pos[corner_copy]
    det = np.einsum("fi,fi->f", p[:, 0], np.cross(p[:, 1], p[:, 2]))
    if np.any(det <= 0):
        raise MetricError(f"{int(np.sum(det <= 0))} faces are laid out with reversed orientation")

    sides = []
    boundary = []
    for label, path in mesh.boundary:
        copies = []
        for t in range(len(path) - 1):
            u, v = path[t], path[t + 1]
            f = half.get((u, v))
            if f is None:
                raise MetricError(f"side {label}: no face on the domain side of ({u}, {v})")
            ku = int(np.nonzero(faces[f] == u)[0][0])
            kv = int(np.nonzero(faces[f] == v)[0][0])
            if t == 0:
                copies.append(corner_copy[f, ku])
            elif copies[-1] != corner_copy[f, ku]:
                raise MetricError(f"side {label} is not a connected boundary path")
            copies.append(corner_copy[f, kv])
        copies = np.array(copies)
        sides.append(Side(label, copies, pos[copies]))
        boundary.extend(copies[:-1].tolist())
    for s, nxt in zip(sides, sides[1:] + sides[:1]):
        if s.copies[-1] != nxt.copies[0]:
            raise MetricError(f"sides {s.label} and {nxt.label} do not meet")
    rep = np.full(mesh.n_vertices, -1, dtype=np.int64)
    for c in range(ncopy - 1, -1, -1):
        rep[copy_vertex[c]] = c
    dom = FundamentalDomain(mesh, corner_copy, copy_vertex, pos, sides, np.array(boundary), rep)
    if check:
        err = dom.embedded_length_error()
        if err > 1e-7:
            raise EmbeddingDriftError(f"edge length realization error {err:.3e}")
        total = float(mesh.face_areas().sum())
        if abs(dom.area() - total) > 1e-6 * total:
            raise MetricError("laid-out faces overlap: boundary area differs from the mesh area")
    return dom


@dataclass
class FuchsianGroup:
    """Side-pairing generators; ``generators[label]`` maps side ``label`` onto its partner."""

    generators: dict
    labels: list

    def element(self, word) -> LorentzIsometry:
        """Product of the letters of ``word`` (a sequence of labels), left to right."""
        g = LorentzIsometry.identity()
        for letter in word:
            g = g @ self.letter(letter)
        return g

    def letter(self, label: str) -> LorentzIsometry:
        if label in self.generators:
            return self.generators[label]
        return self.generators[inverse_label(label)].inverse()

    def alphabet(self) -> list:
        """Generators followed by their inverses."""
        return list(self.labels) + [inverse_label(l) for l in self.labels]

    def relator(self) -> LorentzIsometry:
        """Product over the handles of ``a^-1 b a b^-1``; the identity for a valid pairing.

        With each generator taking side ``x`` onto side ``x^-1``, going once
        around the single corner cycle of the polygon spells this word.
        """
        g = LorentzIsometry.identity()
        for i in range(0, len(self.labels), 2):
            a, b = self.labels[i], self.labels[i + 1]
            g = g @ self.element([inverse_label(a), b, a, inverse_label(b)])
        return g

    def conjugated(self, h: LorentzIsometry) -> "FuchsianGroup":
        hi = h.inverse()
        return FuchsianGroup({k: h @ g @ hi for k, g in self.generators.items()}, list(self.labels))

    def max_residual(self) -> float:
        return max(g.residual() for g in self.generators.values())


def side_pairing_generators(dom: FundamentalDomain, length_tol: float = 1e-6) -> FuchsianGroup:
    """Isometries taking each unprimed side onto its partner, endpoints swapped.

    Frames far from the apex carry large coordinates, so the maps are built
    with the domain centred at the apex and conjugated back.
    """
    frame = LorentzIsometry.translation_to(dom.center())
    centred = dom.transformed(frame.inverse())
    group = _centred_pairing(centred, length_tol)
    if np.allclose(frame.matrix, np.eye(3), rtol=0.0, atol=1e-15):
        return group
    return group.conjugated(frame)


def _centred_pairing(dom: FundamentalDomain, length_tol: float) -> FuchsianGroup:
    gens = {}
    labels = []
    for s in dom.sides:
        base, inv = parse_label(s.label)
        if inv:
            continue
        partner = dom.side(inverse_label(s.label))
        ls = float(np.sum(hyperbolic_distance(s.positions[:-1], s.positions[1:])))
        lp = float(np.sum(hyperbolic_distance(partner.positions[:-1], partner.positions[1:])))
        if abs(ls - lp) > length_tol * max(1.0, ls):
            raise PairingError(f"sides {s.label} and {partner.label} differ in length ({ls!r} vs {lp!r})")
        src = (s.start, unit_tangent(s.start, s.end))
        dst = (partner.end, unit_tangent(partner.end, partner.start))
        gens[s.label] = LorentzIsometry.from_frames(src, dst)
        labels.append(s.label)
    # keep the handle order a1, b1, a2, b2, ... as it appears on the boundary
    return FuchsianGroup(gens, labels)


def endpoint_residual(group: FuchsianGroup, dom: FundamentalDomain) -> float:
    """Largest distance between a mapped side vertex and its partner copy."""
    worst = 0.0
    for label in group.labels:
        s, p = dom.side(label), dom.side(inverse_label(label))
        mapped = group.generators[label].apply(s.positions)
        worst = max(worst, float(hyperbolic_distance(mapped, p.positions[::-1]).max()))
    return worst


@dataclass
class TilePatch:
    """Finite set of group elements with the words that produced them."""

    elements: list
    words: list
    depth: int

    def __len__(self):
        return len(self.elements)

    def matrices(self) -> np.ndarray:
        return np.array([g.matrix for g in self.elements])


def _chord_distance(a, b):
    """Distance from the Minkowski chord, without sheet validation (far points drift)."""
    d = a - b
    return 2.0 * math.asinh(0.5 * math.sqrt(max(float(lorentz_inner(d, d)), 0.0)))


def enumerate_words(group: FuchsianGroup, depth: int, keep=None, anchor=None, strict: bool = True):
    """Distinct elements reachable by reduced words of length at most ``depth``.

    Breadth first, so each element keeps a shortest word.  The group acts
    freely, so two words give the same element exactly when they move an
    interior ``anchor`` point to the same place.  Distinct images are at
    least twice the anchor's distance to the domain boundary apart, so a
    small fraction of the shortest generator displacement serves as the
    matching tolerance.  With ``strict`` on, matched elements must also agree
    as matrices (max-norm difference within ``1e-6`` relative).  ``keep(g)``
    may prune the search.
    """
    if anchor is None:
        anchor = np.array([0.0, 0.0, 1.0])
    # work in a frame centred on the anchor, where products stay well conditioned
    frame = LorentzIsometry.translation_to(normalize(anchor))
    back = frame.inverse()
    alphabet = group.alphabet()
    letters = {l: (back @ group.letter(l) @ frame).reorthonormalized() for l in alphabet}
    user_keep = keep
    if user_keep is not None:
        def keep(h):
            return user_keep(frame @ h @ back)
    anchor = np.array([0.0, 0.0, 1.0])
    shift = min(_chord_distance(g.apply(anchor), anchor) for g in letters.values())
    tol = 1e-3 * shift
    elements = [LorentzIsometry.identity()]
    words = [()]
    images = [normalize(anchor)]
    frontier = [0]
    for _ in range(depth):
        cand = []
        for idx in frontier:
            g, w = elements[idx], words[idx]
            for l in alphabet:
                if w and l == inverse_label(w[-1]):
                    continue
                cand.append(((g @ letters[l]).reorthonormalized(), w + (l,)))
        if not cand:
            break
        img = normalize(np.array([h.matrix @ anchor for h, _ in cand]))
        disk = hyperboloid_to_disk(img)
        # hyperbolic radius tol is Euclidean (1 - r^2) tol / 2 in the disk
        rad = tol * (1.0 - np.sum(disk * disk, axis=1)) + 1e-15
        old = np.array(images)
        hits_old = cKDTree(hyperboloid_to_disk(old)).query_ball_point(disk, rad)
        hits_new = cKDTree(disk).query_ball_point(disk, rad)
        accepted = {}
        nxt = []
        for k, (h, w) in enumerate(cand):
            same = [i for i in hits_old[k] if _chord_distance(old[i], img[k]) < tol]
            same += [accepted[j] for j in hits_new[k]
                     if j < k and j in accepted and _chord_distance(img[j], img[k]) < tol]
            if same:
                if strict:
                    _check_same(h, [elements[i] for i in same])
                continue
            if any(j < k for j in hits_new[k]) and _rejected_twin(k, hits_new[k], accepted, img, tol):
                continue
            if keep is not None and not keep(h):
                continue
            elements.append(h)
            words.append(w)
            images.append(img[k])
            accepted[k] = len(elements) - 1
            nxt.append(len(elements) - 1)
        frontier = nxt
        if not frontier:
            break
    elements = [elements[0]] + [(frame @ h @ back) for h in elements[1:]]
    return elements, words


def _rejected_twin(k, hits, accepted, img, tol):
    # an earlier candidate at the same place that was pruned: prune this one too
    return any(j < k and j not in accepted and _chord_distance(img[j], img[k]) < tol for j in hits)


def _check_same(h, others, rtol: float = 1e-6):
    # words equal in the group differ by the relator residual times the size
    # of their common prefix, so this only guards against a wrong pairing
    scale = max(1.0, float(np.abs(h.matrix).max()))
    if not any(np.abs(o.matrix - h.matrix).max() <= rtol * scale for o in others):
        raise PairingError("two words move the anchor to the same point but differ as isometries")


def boundary_samples(dom: FundamentalDomain, per_edge: int = 2) -> np.ndarray:
    """Points along the domain boundary, corners and polygon vertices included."""
    poly = dom.polygon
    nxt = np.roll(poly, -1, axis=0)
    out = [poly]
    for j in range(1, per_edge):
        t = j / per_edge
        out.append(_lerp(poly, nxt, t))
    return np.concatenate(out)


def _lerp(a, b, t):
    from .lorentz import geodesic_point
    return geodesic_point(a, b, np.full(len(a), t))


def check_containment(elements, dom: FundamentalDomain, ring: float = 1e-5, per_edge: int = 2,
                      spokes: int = 12) -> bool:
    """Whether every sampled boundary point of ``dom`` is interior to the union of tiles.

    A point counts as interior when a small circle of radius ``ring`` around
    it lies inside the union as well.
    """
    pts = boundary_samples(dom, per_edge)
    angles = 2 * np.pi * np.arange(spokes) / spokes
    probes = [pts]
    for a in angles:
        probes.append(_offset(pts, a, ring))
    allp = np.concatenate(probes)
    covered = np.zeros(len(allp), dtype=bool)
    centre = dom.center()
    reach = dom.radius() + 1e-3
    poly_k = hyperboloid_to_klein(dom.polygon)
    for g in elements:
        c = g.apply(centre)
        near = ~covered & (hyperbolic_distance(allp, c) <= reach)
        if not near.any():
            continue
        back = g.inverse().apply(allp[near])
        inside = _in_polygon(hyperboloid_to_klein(back), poly_k, 1e-14)
        idx = np.nonzero(near)[0]
        covered[idx[inside]] = True
        if covered.all():
            return True
    return bool(covered.all())


def _offset(points, angle, dist):
    # move each point a distance `dist` in a fixed direction of its own tangent plane
    e = np.array([math.cos(angle), math.sin(angle), 0.0])
    t = e + lorentz_inner(points, e)[:, None] * points
    t = t / np.sqrt(lorentz_inner(t, t))[:, None]
    return normalize(math.cosh(dist) * points + math.sinh(dist) * t)


def build_tiling(group: FuchsianGroup, dom: FundamentalDomain, depth: int | None = None,
                 max_depth: int | None = None) -> TilePatch:
    """Elements of word length up to ``depth`` whose tiles touch the closed domain.

    Tiles farther than ``2 radius`` from the domain centre cannot meet the
    domain and are dropped during the search.  With ``depth=None`` the depth
    grows from 1 until the tiles cover a neighbourhood of the closed domain,
    up to ``max_depth`` (default ``2 g``: the corners of a one-vertex 4g-gon
    are shared by 4g tiles, the farthest of which is ``2 g`` steps away).
    """
    anchor = dom.center()
    reach = 2 * dom.radius() * (1 + 1e-9) + 1e-6

    def keep(g):
        return _chord_distance(g.apply(anchor), anchor) <= reach

    if depth is not None:
        if depth < 0:
            raise ValueError("depth must be nonnegative")
        elements, words = enumerate_words(group, depth, keep=keep, anchor=anchor)
        return TilePatch(elements, words, depth)
    if max_depth is None:
        max_depth = 2 * dom.genus
    for d in range(1, max_depth + 1):
        elements, words = enumerate_words(group, d, keep=keep, anchor=anchor)
        if check_containment(elements, dom):
            return TilePatch(elements, words, d)
    raise InsufficientTilingError(f"tiles of word length up to {max_depth} do not cover the domain closure")


def verify_containment(patch: TilePatch, dom: FundamentalDomain):
    if not check_containment(patch.elements, dom):
        raise InsufficientTilingError(f"word length {patch.depth} does not cover the domain closure")


def collar_tiles(group: FuchsianGroup, dom: FundamentalDomain, collar: float):
    """Every element whose tile may come within ``collar`` of the domain.

    A tile ``gD`` lies within ``radius`` of its centre ``g c``, so tiles with
    ``d(g c, c) > 2 radius + collar`` are skipped; the rest are reached by a
    breadth-first search over neighbouring tiles.
    """
    centre = dom.center()
    bound = 2 * dom.radius() + collar

    def keep(g):
        return _chord_distance(g.apply(centre), centre) <= bound

    # long words reach the same far element through very different products,
    # so their matrices agree only loosely; the anchor image decides
    elements, words = enumerate_words(group, 10 ** 6, keep=keep, anchor=centre, strict=False)
    return elements, words


def covering_reduce(patch: TilePatch, dom: FundamentalDomain, x):
    """Representative of ``x`` in the closed domain, with the element used.

    Returns ``(point, g)`` with ``point = g^-1 x``.
    """
    x = np.atleast_2d(np.asarray(x, dtype=float))
    out = np.full_like(x, np.nan)
    used = [None] * len(x)
    todo = np.ones(len(x), dtype=bool)
    poly_k = hyperboloid_to_klein(dom.polygon)
    for g in patch.elements:
        if not todo.any():
            break
        idx = np.nonzero(todo)[0]
        back = g.inverse().apply(x[idx])
        inside = _in_polygon(hyperboloid_to_klein(back), poly_k, 1e-12)
        for j, b in zip(idx[inside], back[inside]):
            out[j] = b
            used[j] = g
        todo[idx[inside]] = False
    if todo.any():
        raise OutOfPatchError(f"{int(todo.sum())} points lie outside the tiled patch")
    return out, used

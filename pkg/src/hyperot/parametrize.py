"""Area-preserving parametrization of closed surfaces of genus at least two.

The surface comes with a hyperbolic metric (per-edge lengths).  Its vertices
are laid out in a fundamental domain, the transport solver finds heights whose
power cells carry each vertex's share of the surface area, and the centre of
each cell becomes the new position of the vertex.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from .errors import DegenerateInputError, InadmissibleStateError, InputError
from .fuchsian import MetricMesh, build_tiling, embed_domain, side_pairing_generators, verify_containment
from .lorentz import hyperboloid_to_disk, normalize
from .quadrature import integrate_polygons
from .solver import TargetMeasure, TransportMap, cell_centroids, damped_newton
from .surface import SurfaceProblem

TARGET_MODES = ("euclidean-face-area", "hyperbolic-face-area", "uniform")


def euclidean_face_areas(positions, faces) -> np.ndarray:
    p = np.asarray(positions, dtype=float)
    if p.shape[1] == 2:
        p = np.column_stack([p, np.zeros(len(p))])
    f = np.asarray(faces)
    return 0.5 * np.linalg.norm(np.cross(p[f[:, 1]] - p[f[:, 0]], p[f[:, 2]] - p[f[:, 0]]), axis=1)


def gauss_bonnet_area(genus: int) -> float:
    return 2 * math.pi * (2 * genus - 2)


def scale_to_gauss_bonnet(mesh: MetricMesh, genus: int | None = None) -> MetricMesh:
    """Copy of ``mesh`` whose own geometry is scaled to area ``2 pi (2g - 2)``."""
    g = mesh.genus if genus is None else genus
    if mesh.positions is None:
        raise InputError("mesh has no vertex positions to scale")
    total = float(euclidean_face_areas(mesh.positions, mesh.faces).sum())
    if not total > 0:
        raise DegenerateInputError("mesh has zero area")
    k = math.sqrt(gauss_bonnet_area(g) / total)
    return replace(mesh, positions=np.asarray(mesh.positions, dtype=float) * k)


def vertex_measure(faces, face_areas, n_vertices: int | None = None) -> TargetMeasure:
    """Each face gives a third of its area to each of its corners."""
    faces = np.asarray(faces)
    a = np.asarray(face_areas, dtype=float)
    n = int(faces.max()) + 1 if n_vertices is None else n_vertices
    nu = np.zeros(n)
    np.add.at(nu, faces.ravel(), np.repeat(a / 3.0, 3))
    if np.any(nu <= 0):
        bad = np.nonzero(nu <= 0)[0]
        raise DegenerateInputError(f"vertices {bad[:10].tolist()} carry no area")
    return TargetMeasure(nu)


def surface_target(mesh: MetricMesh, mode: str, masses=None) -> TargetMeasure:
    """Vertex masses summing to the Gauss-Bonnet area."""
    total = gauss_bonnet_area(mesh.genus)
    n = mesh.n_vertices
    if mode == "euclidean-face-area":
        scaled = scale_to_gauss_bonnet(mesh)
        nu = vertex_measure(mesh.faces, euclidean_face_areas(scaled.positions, mesh.faces), n)
    elif mode == "hyperbolic-face-area":
        nu = vertex_measure(mesh.faces, mesh.face_areas(), n)
    elif mode == "uniform":
        nu = TargetMeasure(np.full(n, total / n))
    elif mode == "file":
        if masses is None or len(masses) != n:
            raise InputError(f"target file must give {n} masses")
        nu = TargetMeasure(masses)
    else:
        raise InputError(f"unknown target mode {mode!r}")
    # the metric areas meet Gauss-Bonnet only up to rounding; pin the total exactly
    out, _ = nu.normalized_to(total)
    return out


@dataclass
class Parametrization:
    """New vertex positions (cell centres) with target and achieved areas."""

    positions: np.ndarray
    sites: np.ndarray
    target: np.ndarray
    areas: np.ndarray
    transport: TransportMap
    problem: SurfaceProblem
    depth: int

    @property
    def disk(self) -> np.ndarray:
        return hyperboloid_to_disk(self.positions)

    def max_relative_error(self) -> float:
        return float(np.max(np.abs(self.areas - self.target) / self.target))

    def to_dict(self) -> dict:
        uv = self.disk
        return {
            "genus": self.problem.genus,
            "tile_depth": self.depth,
            "iterations": self.transport.iterations,
            "vertices": [
                {"u": float(u), "v": float(v), "nu": float(a), "omega": float(w)}
                for (u, v), a, w in zip(uv, self.target, self.areas)
            ],
        }


def cell_centroid(diagram, i: int, level: int = 2) -> np.ndarray:
    """Normalized area-weighted mean of cell ``i`` (a point on the sheet)."""
    if diagram.degenerate[i]:
        raise InadmissibleStateError(f"cell {i} is empty or degenerate")
    lo, hi = diagram.cell_offsets[i], diagram.cell_offsets[i + 1]
    off = np.array([0, hi - lo])
    m = integrate_polygons(off, diagram.cell_vertices[lo:hi], lambda p, o: p, level)[0]
    return normalize(m)


def parametrize(mesh: MetricMesh, target_mode: str = "hyperbolic-face-area", masses=None,
                lambda0: float = 0.5, eps: float = 1e-6, max_iters: int = 200,
                tile_depth: int | None = None, log=None, domain=None) -> Parametrization:
    """Lay out the mesh, solve for cell areas matching the target, take centres."""
    if mesh.genus < 2:
        raise InputError("genus must be at least 2")
    dom = domain if domain is not None else embed_domain(mesh).recentred()
    group = side_pairing_generators(dom)
    patch = build_tiling(group, dom, tile_depth)
    if tile_depth is not None:
        verify_containment(patch, dom)
    problem = SurfaceProblem(dom, group)
    problem._patch = patch
    nu = surface_target(mesh, target_mode, masses)
    # stop on the absolute residual, tight enough that the relative error is below eps too
    tol = eps * min(1.0, float(nu.masses.min()))
    tmap = damped_newton(problem, nu, lambda0=lambda0, eps=tol, max_iters=max_iters, log=log)
    centres = cell_centroids(tmap.diagram)
    return Parametrization(centres, problem.centers, nu.masses, tmap.diagram.areas.copy(), tmap, problem,
                           patch.depth)

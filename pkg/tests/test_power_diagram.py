import itertools
import math

import numpy as np
import pytest
from conftest import random_sites

from hyperot.domain import ConvexDomain
from hyperot.errors import DegenerateInputError, DuplicateSiteError
from hyperot.lorentz import (
    APEX,
    LorentzIsometry,
    disk_to_hyperboloid,
    hyperbolic_distance,
    hyperboloid_to_klein,
    lorentz_inner,
    polar_point,
    signed_triangle_area,
)
from hyperot.power_diagram import (
    GeodesicCircle,
    build_hull,
    build_power_diagram,
    diagram_to_dict,
    dual_vertex,
    edge_geometry,
    edge_weights,
    hessian_edge_geometry,
    lifted_points,
    power_center,
    power_distance,
)
from hyperot.synthetic import hex_disk_points


def brute_force_faces(centers, heights):
    """Faces of conv{z_i} seen from the origin, by testing every triple.

    A triple is a face when every other lifted point lies on one side of its
    plane and the origin strictly on the other.
    """
    z = lifted_points(centers, heights)
    n = len(z)
    faces = set()
    for i, j, k in itertools.combinations(range(n), 3):
        normal = np.cross(z[j] - z[i], z[k] - z[i])
        scale = np.abs(normal).sum() * np.abs(z).max()
        s = (z - z[i]) @ normal
        s[[i, j, k]] = 0.0
        o = -z[i] @ normal
        if o > 1e-12 * scale and np.all(s <= 1e-12 * scale):
            faces.add((i, j, k))
        elif o < -1e-12 * scale and np.all(s >= -1e-12 * scale):
            faces.add((i, j, k))
    return faces


def cell_membership(diagram, samples):
    k = hyperboloid_to_klein(samples)
    own = np.full(len(samples), -1)
    for i in range(diagram.n_sites):
        v, _ = diagram.cell(i)
        if len(v) < 3:
            continue
        a = hyperboloid_to_klein(v)
        e = np.roll(a, -1, axis=0) - a
        rel = k[:, None, :] - a[None]
        cross = e[None, :, 0] * rel[..., 1] - e[None, :, 1] * rel[..., 0]
        own[np.all(cross >= -1e-13, axis=1)] = i
    return own


def test_power_distance_values():
    c = polar_point(0.4, 1.0)
    r = 0.7
    phi = math.log(math.cosh(r))
    assert float(power_distance(c, c, phi)) == pytest.approx(1 / math.cosh(r), rel=1e-14)
    q = polar_point(1.3, -0.2)
    assert float(power_distance(q, c, 0.0)) == pytest.approx(math.cosh(float(hyperbolic_distance(q, c))), rel=1e-12)


def test_geodesic_circle_radius():
    c = GeodesicCircle.from_radius(APEX, 0.8)
    assert c.radius == pytest.approx(0.8, rel=1e-14)
    assert c.rho == pytest.approx(1 / math.cosh(0.8), rel=1e-14)


def test_equal_radii_bisector_is_perpendicular_bisector():
    a, b = polar_point(0.9, 2.0), polar_point(0.4, -0.3)
    d = build_power_diagram(np.array([a, b]), np.zeros(2), ConvexDomain.hull_of(
        polar_point(np.full(6, 3.0), np.arange(6) * math.pi / 3)))
    # shared edge: every point on it is equidistant from both centres
    v, lab = d.cell(0)
    m = int(np.nonzero(lab == 1)[0][0])
    ends = v[m], v[(m + 1) % len(v)]
    from hyperot.lorentz import geodesic_point
    pts = geodesic_point(np.broadcast_to(ends[0], (100, 3)), np.broadcast_to(ends[1], (100, 3)), np.linspace(0, 1, 100))
    np.testing.assert_allclose(hyperbolic_distance(pts, a), hyperbolic_distance(pts, b), atol=1e-10)


def test_hull_matches_brute_force(rng):
    for trial in range(10):
        n = 20
        x = random_sites(rng, n)
        phi = rng.normal(0, 0.2 if trial % 2 else 0.0, n)
        hull = build_hull(x, phi)
        got = {tuple(sorted(f)) for f in hull.triangles()}
        assert got == {tuple(sorted(f)) for f in brute_force_faces(x, phi)}


def test_dominated_site_is_not_a_vertex():
    x = np.vstack([polar_point(np.full(3, 1.0), np.arange(3) * 2 * math.pi / 3), polar_point(0.1, 0.3)])
    phi = np.array([0.0, 0.0, 0.0, -2.0])
    hull = build_hull(x, phi)
    assert 3 not in hull.triangles()
    assert hull.hidden[3]
    d = build_power_diagram(x, phi)
    assert d.degenerate[3]


def test_three_sites_one_face():
    x = polar_point(np.full(3, 0.8), np.arange(3) * 2 * math.pi / 3)
    hull = build_hull(x, np.zeros(3))
    tri = hull.triangles()
    assert len(tri) == 1
    y = dual_vertex(hull, int(np.nonzero(hull.real_faces)[0][0]))
    np.testing.assert_allclose(y, APEX, atol=1e-14)


def test_dual_vertex_equal_power(rng):
    x = random_sites(rng, 30)
    phi = rng.normal(0, 0.2, 30)
    hull = build_hull(x, phi)
    z = hull.lifted
    for t in np.nonzero(hull.real_faces & hull.timelike)[0]:
        y = dual_vertex(hull, t)
        p = -lorentz_inner(z[hull.faces[t]], y)
        assert np.ptp(p) < 1e-9 * p.max()


def test_power_center():
    x = polar_point(np.full(3, 0.8), np.arange(3) * 2 * math.pi / 3)
    np.testing.assert_allclose(power_center(x, np.zeros(3)).center, APEX, atol=1e-14)
    y = np.array([polar_point(0.3, 0.1), polar_point(1.2, 2.0), polar_point(0.9, 4.0)])
    o = power_center(y, np.zeros(3)).center
    d = hyperbolic_distance(y, o)
    assert np.ptp(d) < 1e-9
    phi = np.array([0.1, -0.2, 0.3])
    pc = power_center(y, phi)
    p = power_distance(pc.center, y, phi)
    assert np.ptp(p) < 1e-9
    with pytest.raises(DegenerateInputError):
        power_center(np.array([polar_point(0.5, 0.0), APEX, polar_point(0.5, math.pi)]), np.zeros(3))


def test_duplicate_sites_rejected():
    x = np.array([APEX, APEX, polar_point(1.0, 0.0)])
    with pytest.raises(DuplicateSiteError):
        build_hull(x, np.zeros(3))


def test_assignment_oracle(rng):
    for trial in range(5):
        n = 15
        x = random_sites(rng, n)
        phi = rng.normal(0, 0.2, n)
        d = build_power_diagram(x, phi)
        s = d.domain.sample(10_000, rng)
        p = power_distance(s[:, None, :], x[None], phi[None])
        srt = np.sort(p, axis=1)
        clear = (srt[:, 1] - srt[:, 0]) > 1e-6 * srt[:, 0]
        assert np.array_equal(cell_membership(d, s)[clear], np.argmin(p, axis=1)[clear])


def test_conservation_and_symmetry(rng):
    x = random_sites(rng, 12)
    phi = rng.normal(0, 0.2, 12)
    d = build_power_diagram(x, phi)
    assert d.areas.sum() == pytest.approx(d.domain.area(), rel=1e-9)
    # three symmetric sites in a symmetric triangle get equal thirds
    ang = np.arange(3) * 2 * math.pi / 3
    dom = ConvexDomain(polar_point(np.full(3, 2.0), ang + math.pi / 3))
    d = build_power_diagram(polar_point(np.full(3, 0.6), ang), np.zeros(3), dom)
    np.testing.assert_allclose(d.areas, dom.area() / 3, rtol=1e-9)


def test_single_cell_domain_area():
    from hyperot.solver import PlanarProblem
    tri = polar_point(np.full(3, 1.0), np.arange(3) * 2 * math.pi / 3)
    prob = PlanarProblem(APEX[None], ConvexDomain(tri))
    d = prob.diagram(np.zeros(1))
    assert d.areas[0] == pytest.approx(float(signed_triangle_area(*tri)), rel=1e-14)


def test_unweighted_adjacency_matches_delaunay():
    pts = hex_disk_points()
    x = disk_to_hyperboloid(pts)
    d = build_power_diagram(x, np.zeros(len(x)))
    tri = brute_force_faces(x, np.zeros(len(x)))
    edges = set()
    for t in tri:
        for a, b in ((t[0], t[1]), (t[1], t[2]), (t[2], t[0])):
            edges.add((min(a, b), max(a, b)))
    assert len(d.areas) == 61
    assert set(map(tuple, d.adjacency())) == edges
    # the hyperbolic Delaunay triangulation of the lattice is the lattice triangulation
    from hyperot.synthetic import lattice_triangles
    assert {tuple(sorted(t)) for t in tri} == {tuple(sorted(t)) for t in lattice_triangles(pts)}


def test_invariance_under_isometry(rng):
    x = random_sites(rng, 10, radius=1.0)
    phi = rng.normal(0, 0.2, 10)
    d = build_power_diagram(x, phi)
    g = LorentzIsometry.translation_to(polar_point(1.5, 0.7)) @ LorentzIsometry.rotation(0.4)
    dom = ConvexDomain(g.apply(d.domain.vertices))
    d2 = build_power_diagram(g.apply(x), phi, dom)
    np.testing.assert_allclose(d2.areas, d.areas, rtol=1e-9, atol=1e-12)


def test_edge_geometry_symmetric_cases():
    xi, xj = polar_point(0.5, math.pi), polar_point(0.5, 0.0)
    ya, yb = polar_point(0.7, -math.pi / 2), polar_point(0.7, math.pi / 2)
    gi, gj, dk, dl = edge_geometry(xi, 0.0, xj, 0.0, ya, yb)
    assert gi == pytest.approx(gj, abs=1e-14)
    assert dk == pytest.approx(dl, abs=1e-14)
    assert gi == pytest.approx(0.5, abs=1e-14)


def _fd_areas(x, phi, dom, j, h=1e-6):
    p1, p2 = phi.copy(), phi.copy()
    p1[j] -= h
    p2[j] += h
    return (build_power_diagram(x, p2, dom).areas - build_power_diagram(x, p1, dom).areas) / (2 * h)


def test_edge_derivative_formula(rng):
    x = random_sites(rng, 10, radius=1.2)
    phi = rng.normal(0, 0.1, 10)
    d = build_power_diagram(x, phi)
    checked = 0
    for i in range(10):
        verts, lab = d.cell(i)
        for m, j in enumerate(lab):
            if j < 0:
                continue
            gi, gj, dk, dl = hessian_edge_geometry(d, i, j)
            formula = -(math.sinh(dk) + math.sinh(dl)) / (math.tanh(gi) + math.tanh(gj))
            fd = _fd_areas(x, phi, d.domain, j)[i]
            assert formula == pytest.approx(fd, rel=1e-6, abs=1e-9)
            checked += 1
    assert checked > 10
    # the vectorized weights agree with the per-edge formula
    ci, cj, w = edge_weights(d)
    for a, b, val in zip(ci, cj, w):
        gi, gj, dk, dl = hessian_edge_geometry(d, int(a), int(b))
        assert val == pytest.approx(-(math.sinh(dk) + math.sinh(dl)) / (math.tanh(gi) + math.tanh(gj)), rel=1e-9)


def test_diagram_dump():
    x = disk_to_hyperboloid(hex_disk_points(rings=2))
    dump = diagram_to_dict(build_power_diagram(x, np.zeros(len(x))))
    assert len(dump["cells"]) == len(x)
    assert dump["mode"] == "planar"
    for cell in dump["cells"]:
        assert len(cell["vertices"]) == len(cell["neighbors"])

import math

import numpy as np
import pytest

from hyperot import synthetic
from hyperot.fuchsian import collar_tiles, embed_domain
from hyperot.lorentz import hyperbolic_distance, normalize
from hyperot.quadrature import polygon_nodes
from hyperot.solver import damped_newton, hessian
from hyperot.surface import SurfaceProblem, certify


@pytest.fixture(scope="module")
def irregular_problem(irregular_domain, irregular_group):
    return SurfaceProblem(irregular_domain, irregular_group)


def test_areas_sum_to_gauss_bonnet(irregular_problem, rng):
    prob = irregular_problem
    assert prob.total_area() == pytest.approx(4 * math.pi, rel=1e-15)
    for scale in (0.0, 0.005, 0.02):
        d = prob.diagram(rng.normal(0, scale, prob.n_sites))
        assert not d.degenerate.any()
        assert prob.last_collar < 3.0
        assert d.areas.sum() == pytest.approx(4 * math.pi, rel=1e-9)
        assert not certify(d, prob.last_collar).any()


def test_larger_collar_changes_nothing(irregular_domain, irregular_group, rng):
    phi = rng.normal(0, 0.02, len(irregular_domain.vertex_positions))
    a = SurfaceProblem(irregular_domain, irregular_group).diagram(phi)
    b = SurfaceProblem(irregular_domain, irregular_group, collar=3.0).diagram(phi)
    np.testing.assert_allclose(a.areas, b.areas, rtol=1e-11, atol=1e-13)


def test_cells_agree_with_brute_force_over_translates(irregular_problem, irregular_group, irregular_domain, rng):
    prob = irregular_problem
    phi = rng.normal(0, 0.02, prob.n_sites)
    d = prob.diagram(phi)
    elements, _ = collar_tiles(irregular_group, irregular_domain, 2.0)
    mats = np.array([g.matrix for g in elements])
    copies = normalize(np.einsum("tij,nj->tni", mats, prob.centers)).reshape(-1, 3)
    owner = np.tile(np.arange(prob.n_sites), len(elements))
    pts, _, cell = polygon_nodes(d.cell_offsets, d.cell_vertices, level=1)
    scale = np.exp(-phi[owner])
    for lo in range(0, len(pts), 200):
        power = scale[None] * -(pts[lo:lo + 200] @ np.diag([1.0, 1.0, -1.0]) @ copies.T)
        srt = np.partition(power, 1, axis=1)
        clear = srt[:, 1] - srt[:, 0] > 1e-9 * srt[:, 0]
        assert clear.mean() > 0.9
        assert np.array_equal(owner[np.argmin(power, axis=1)][clear], cell[lo:lo + 200][clear])


def test_surface_hessian_matches_finite_differences(irregular_problem, rng):
    prob = irregular_problem
    phi = rng.normal(0, 0.02, prob.n_sites)
    h = hessian(prob.diagram(phi))
    assert np.abs(h - h.T).max() < 1e-9
    assert np.abs(h.sum(axis=1)).max() < 1e-9
    eps = 1e-6
    for j in rng.choice(prob.n_sites, 6, replace=False):
        p1, p2 = phi.copy(), phi.copy()
        p1[j] -= eps
        p2[j] += eps
        col = (prob.diagram(p2).areas - prob.diagram(p1).areas) / (2 * eps)
        np.testing.assert_allclose(h[:, j], col, rtol=1e-6, atol=1e-8)


def test_locate_matches_cells(irregular_problem, rng):
    prob = irregular_problem
    nu = np.full(prob.n_sites, prob.total_area() / prob.n_sites)
    tmap = damped_newton(prob, nu)
    d = tmap.diagram
    pts, _, cell = polygon_nodes(d.cell_offsets, d.cell_vertices, level=0)
    pick = rng.choice(len(pts), 200, replace=False)
    got = [tmap.lookup(p) for p in pts[pick]]
    assert got == list(cell[pick])
    # translates of a point belong to the same cell
    g = prob.group.generators["b2"]
    assert [tmap.lookup(g.apply(p)) for p in pts[pick[:20]]] == list(cell[pick[:20]])


def test_genus_three_areas():
    dom = embed_domain(synthetic.regular_surface(3, 3)).recentred()
    prob = SurfaceProblem(dom)
    d = prob.diagram(np.zeros(prob.n_sites))
    assert d.areas.sum() == pytest.approx(8 * math.pi, rel=1e-9)


def test_sites_far_from_each_other_keep_cells_near(irregular_problem):
    # every canonical cell stays within the collar of its own site
    prob = irregular_problem
    d = prob.diagram(np.zeros(prob.n_sites))
    sizes = np.diff(d.cell_offsets)
    cell = np.repeat(np.arange(prob.n_sites), sizes)
    r = hyperbolic_distance(d.cell_vertices, prob.centers[cell])
    assert r.max() < prob.last_collar


def test_empty_cell_does_not_grow_collar(irregular_domain, irregular_group):
    prob = SurfaceProblem(irregular_domain, irregular_group)
    phi = np.zeros(prob.n_sites)
    phi[5] = -1.0
    d = prob.diagram(phi)
    assert d.degenerate[5]
    assert len(prob._copies) == 1

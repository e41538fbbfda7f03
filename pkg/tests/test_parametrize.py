import math
from dataclasses import replace

import numpy as np
import pytest

from hyperot import synthetic
from hyperot.domain import ConvexDomain
from hyperot.errors import DegenerateInputError, InputError, NonConvergenceError
from hyperot.fuchsian import build_tiling, embed_domain
from hyperot.lorentz import APEX, LorentzIsometry, normalize, polar_point
from hyperot.parametrize import (
    cell_centroid,
    euclidean_face_areas,
    gauss_bonnet_area,
    parametrize,
    scale_to_gauss_bonnet,
    surface_target,
    vertex_measure,
)
from hyperot.power_diagram import build_power_diagram
from hyperot.solver import PlanarProblem


def _chord(a, b):
    # distance that tolerates slightly off-sheet far points
    d = np.asarray(a) - np.asarray(b)
    q = d[..., 0] ** 2 + d[..., 1] ** 2 - d[..., 2] ** 2
    return 2 * np.arcsinh(0.5 * np.sqrt(np.maximum(q, 0.0)))


@pytest.fixture(scope="module")
def octagon_result(octagon_mesh):
    return parametrize(octagon_mesh, "uniform")


@pytest.fixture(scope="module")
def irregular_result(irregular_mesh):
    return parametrize(irregular_mesh)


def test_gauss_bonnet_values():
    assert gauss_bonnet_area(2) == pytest.approx(4 * math.pi, rel=1e-15)
    assert gauss_bonnet_area(2) == pytest.approx(12.566, abs=1e-3)
    assert gauss_bonnet_area(3) == pytest.approx(8 * math.pi, rel=1e-15)


def test_scale_to_gauss_bonnet(octagon_mesh):
    rng = np.random.default_rng(3)
    mesh = replace(octagon_mesh, positions=rng.normal(size=(octagon_mesh.n_vertices, 3)))
    once = scale_to_gauss_bonnet(mesh)
    total = euclidean_face_areas(once.positions, once.faces).sum()
    assert total == pytest.approx(4 * math.pi, rel=1e-12)
    twice = scale_to_gauss_bonnet(once)
    np.testing.assert_allclose(twice.positions, once.positions, rtol=1e-12)
    g3 = scale_to_gauss_bonnet(mesh, genus=3)
    assert euclidean_face_areas(g3.positions, g3.faces).sum() == pytest.approx(8 * math.pi, rel=1e-12)
    with pytest.raises(DegenerateInputError):
        scale_to_gauss_bonnet(replace(mesh, positions=np.zeros((mesh.n_vertices, 3))))


def test_vertex_measure_examples(irregular_mesh):
    nu = vertex_measure([[0, 1, 2]], [0.9])
    np.testing.assert_allclose(nu.masses, 0.3, rtol=1e-15)
    fan = [[0, k, k % 6 + 1] for k in range(1, 7)]
    nu = vertex_measure(fan, np.ones(6))
    assert nu.masses[0] == pytest.approx(2.0, rel=1e-15)
    areas = irregular_mesh.face_areas()
    nu = vertex_measure(irregular_mesh.faces, areas)
    assert abs(nu.total - areas.sum()) <= 1e-12 * areas.sum()
    with pytest.raises(DegenerateInputError):
        vertex_measure([[0, 1, 3]], [1.0])


def test_surface_target_modes(irregular_mesh):
    for mode in ("hyperbolic-face-area", "uniform"):
        nu = surface_target(irregular_mesh, mode)
        assert nu.total == pytest.approx(4 * math.pi, rel=1e-9)
    with pytest.raises(InputError):
        surface_target(irregular_mesh, "nonsense")
    with pytest.raises(InputError):
        surface_target(irregular_mesh, "file", [1.0, 2.0])


def test_centroid_of_symmetric_cell_is_apex():
    ang = np.arange(6) * math.pi / 3
    x = polar_point(np.full(6, 0.7), ang)
    x = np.vstack([APEX, x])
    d = build_power_diagram(x, np.zeros(7), ConvexDomain(polar_point(np.full(6, 2.0), ang + math.pi / 6)))
    # the fan quadrature is not itself symmetric; the error shrinks with the level
    np.testing.assert_allclose(cell_centroid(d, 0), APEX, atol=1e-8)
    np.testing.assert_allclose(cell_centroid(d, 0, level=4), APEX, atol=1e-11)


def test_centroid_does_not_depend_on_labels():
    tri = np.array([polar_point(0.9, 0.3), polar_point(1.4, 2.2), polar_point(0.6, 4.0)])
    site = normalize(tri.sum(axis=0))[None]
    cents = []
    for perm in ([0, 1, 2], [1, 2, 0], [2, 0, 1]):
        prob = PlanarProblem(site, ConvexDomain(tri[perm]))
        cents.append(cell_centroid(prob.diagram(np.zeros(1)), 0))
    np.testing.assert_allclose(cents[0], cents[1], atol=1e-13)
    np.testing.assert_allclose(cents[0], cents[2], atol=1e-13)


def test_parametrization_converges(irregular_result):
    res = irregular_result
    assert res.max_relative_error() < 1e-6
    assert res.areas.sum() == pytest.approx(4 * math.pi, rel=1e-9)
    assert res.target.sum() == pytest.approx(4 * math.pi, rel=1e-9)
    assert np.all(np.isfinite(res.positions))
    # residuals strictly decrease over accepted steps
    r = [h.residual_inf for h in res.transport.history]
    assert all(b < a for a, b in zip(r, r[1:]))
    dump = res.to_dict()
    assert len(dump["vertices"]) == res.problem.n_sites
    assert dump["genus"] == 2


def test_centroids_lie_in_their_cells(irregular_result):
    from hyperot.lorentz import hyperboloid_to_klein
    d = irregular_result.transport.diagram
    for i in range(d.n_sites):
        v, _ = d.cell(i)
        k = hyperboloid_to_klein(v)
        c = hyperboloid_to_klein(irregular_result.positions[i])
        e = np.roll(k, -1, axis=0) - k
        rel = c - k
        assert np.all(e[:, 0] * rel[:, 1] - e[:, 1] * rel[:, 0] > 0)


def test_equivariance_under_generator(irregular_mesh, irregular_domain, irregular_group, irregular_result):
    g = irregular_group.generators["a1"]
    moved = parametrize(irregular_mesh, domain=irregular_domain.transformed(g), eps=1e-6)
    img = g.apply(irregular_result.positions)
    assert float(np.max(_chord(img, moved.positions))) < 1e-7


def test_symmetric_octagon_keeps_its_symmetry(octagon_result, octagon_domain, octagon_group):
    # the half turn about the centre maps the octagon surface to itself
    res = octagon_result
    assert res.max_relative_error() < 1e-6
    rot = LorentzIsometry.rotation(math.pi)
    sites = res.sites
    patch = build_tiling(octagon_group, octagon_domain)
    mats = patch.matrices()
    # the image of every site is some site, up to the group
    turned = rot.apply(sites)
    orbit = normalize(np.einsum("tij,nj->tni", mats, sites))
    dist = _chord(turned[None, :, None], orbit[:, None, :, :])
    match = np.argmin(dist.min(axis=0), axis=1)
    assert dist.min(axis=0).min(axis=1).max() < 1e-7
    # the matching carries centroids to centroids, again up to the group
    cents = normalize(np.einsum("tij,nj->tni", mats, res.positions))
    tc = rot.apply(res.positions)
    gap = _chord(tc[None], cents[:, match]).min(axis=0)
    assert gap.max() < 1e-6
    np.testing.assert_allclose(res.areas, res.areas[match], rtol=1e-7)


def test_nonconvergence_keeps_log(irregular_mesh, irregular_domain):
    seen = []
    with pytest.raises(NonConvergenceError) as err:
        parametrize(irregular_mesh, max_iters=1, log=seen.append, domain=irregular_domain)
    assert len(seen) == 2
    assert len(err.value.state.history) == 2


def test_genus_three_converges():
    mesh = synthetic.regular_surface(3, 3)
    dom = embed_domain(mesh).recentred()
    res = parametrize(mesh, "hyperbolic-face-area", domain=dom)
    assert res.max_relative_error() < 1e-6
    assert res.areas.sum() == pytest.approx(8 * math.pi, rel=1e-9)


def test_rejects_low_genus(octagon_mesh):
    with pytest.raises(InputError):
        parametrize(replace(octagon_mesh, genus=1))

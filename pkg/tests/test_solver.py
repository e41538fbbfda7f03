import math

import numpy as np
import pytest
from conftest import random_sites

from hyperot.domain import ConvexDomain
from hyperot.errors import MeasureMismatchError, NonConvergenceError
from hyperot.lorentz import APEX, disk_to_hyperboloid, hyperbolic_distance, polar_point
from hyperot.power_diagram import power_distance
from hyperot.solver import (
    CSV_HEADER,
    PlanarProblem,
    TargetMeasure,
    cell_centroids,
    damped_newton,
    dual_energy,
    gradient,
    hessian,
    history_csv,
    kantorovich_energy,
    newton_step,
    transport_cost,
)


def random_problem(rng, n=10, radius=1.2):
    x = random_sites(rng, n, radius)
    return PlanarProblem(x)


def test_transport_cost_values(rng):
    assert transport_cost(APEX, APEX) == 0.0
    p = disk_to_hyperboloid(np.array([0.5, 0.0]))
    assert float(transport_cost(APEX, p)) == pytest.approx(math.log(5 / 3), abs=1e-14)
    x = random_sites(rng, 50, 3.0)
    y = random_sites(rng, 50, 3.0)
    np.testing.assert_allclose(transport_cost(x, y), np.log(np.cosh(hyperbolic_distance(x, y))), rtol=1e-12,
                               atol=1e-12)


def test_gradient_vanishes_at_target(rng):
    prob = random_problem(rng)
    d = prob.diagram(np.zeros(prob.n_sites))
    np.testing.assert_array_equal(gradient(d, d.areas), np.zeros(prob.n_sites))


def test_hessian_structure(rng):
    for trial in range(100):
        n = int(rng.integers(3, 15))
        prob = random_problem(rng, n)
        phi = rng.normal(0, 0.05, n)
        d = prob.diagram(phi)
        if np.any(d.degenerate):
            continue
        h = hessian(d)
        assert np.abs(h - h.T).max() <= 1e-9 * np.abs(h).max()
        off = h - np.diag(np.diag(h))
        assert off.max() <= 0
        assert np.abs(h.sum(axis=1)).max() <= 1e-9 * np.abs(h).max()
        w, v = np.linalg.eigh(h)
        assert w[0] > -1e-9 * w[-1]
        assert abs(w[0]) < 1e-9 * w[-1]
        np.testing.assert_allclose(np.abs(v[:, 0]), 1 / math.sqrt(n), atol=1e-6)
        assert w[1] > 1e-9 * w[-1]


def test_two_sites():
    x = np.array([polar_point(0.5, math.pi), polar_point(0.5, 0.0)])
    dom = ConvexDomain(polar_point(np.full(4, 1.5), np.arange(4) * math.pi / 2 + math.pi / 4))
    prob = PlanarProblem(x, dom)
    d = prob.diagram(np.zeros(2))
    h = hessian(d)
    assert h[0, 0] > 0
    np.testing.assert_allclose(h, h[0, 0] * np.array([[1, -1], [-1, 1]]), rtol=1e-12)
    g = np.array([0.3, -0.3])
    step = newton_step(h, g)
    np.testing.assert_allclose(step, -g / (2 * h[0, 0]), rtol=1e-12)


def test_newton_step_residual(rng):
    for _ in range(20):
        n = 12
        a = rng.uniform(0, 1, (n, n)) * (rng.uniform(0, 1, (n, n)) < 0.5)
        a = np.triu(a, 1)
        a = a + a.T
        a[np.arange(n - 1), np.arange(1, n)] = a[np.arange(1, n), np.arange(n - 1)] = 1.0
        h = np.diag(a.sum(axis=1)) - a
        g = rng.normal(size=n)
        g -= g.mean()
        s = newton_step(h, g)
        assert abs(s.sum()) < 1e-12
        assert np.abs(h @ s + g).max() < 1e-10
    assert not np.any(newton_step(h, np.zeros(n)))


def test_hessian_finite_differences(rng):
    prob = random_problem(rng, 8)
    phi = rng.normal(0, 0.05, 8)
    h = hessian(prob.diagram(phi))
    eps = 1e-6
    for j in range(8):
        p1, p2 = phi.copy(), phi.copy()
        p1[j] -= eps
        p2[j] += eps
        col = (prob.diagram(p2).areas - prob.diagram(p1).areas) / (2 * eps)
        np.testing.assert_allclose(h[:, j], col, rtol=1e-6, atol=1e-9)


def test_energy_gradient_and_shift(rng):
    prob = random_problem(rng, 8)
    nu = TargetMeasure(np.full(8, prob.total_area() / 8))
    phi = rng.normal(0, 0.05, 8)
    e0 = dual_energy(prob, phi, nu)
    assert dual_energy(prob, phi + 0.3, nu) == pytest.approx(e0, abs=1e-12)
    assert dual_energy(prob, np.zeros(8), nu) == 0.0
    # path quadrature and the closed form are independent routes to the energy
    assert kantorovich_energy(prob, phi, nu, nodes=128) == pytest.approx(e0, abs=1e-8)
    g = gradient(prob.diagram(phi), nu.masses)
    eps = 1e-5
    for _ in range(3):
        u = rng.normal(size=8)
        fd = (dual_energy(prob, phi + eps * u, nu) - dual_energy(prob, phi - eps * u, nu)) / (2 * eps)
        assert fd == pytest.approx(g @ u, rel=1e-5, abs=1e-9)


def test_single_site_converges_immediately():
    dom = ConvexDomain(polar_point(np.full(3, 1.0), np.arange(3) * 2 * math.pi / 3))
    prob = PlanarProblem(APEX[None], dom)
    tmap = damped_newton(prob, [dom.area()])
    assert tmap.iterations == 0
    assert tmap.heights[0] == 0.0


def test_symmetric_sites_stay_at_zero():
    ang = np.arange(3) * 2 * math.pi / 3
    dom = ConvexDomain(polar_point(np.full(3, 2.0), ang + math.pi / 3))
    prob = PlanarProblem(polar_point(np.full(3, 0.6), ang), dom)
    tmap = damped_newton(prob, np.full(3, dom.area() / 3))
    assert tmap.iterations <= 1
    assert np.abs(tmap.heights).max() < 1e-12


def test_hexagon_plus_centre_uniform():
    x = np.vstack([APEX, polar_point(np.full(6, 0.5), np.arange(6) * math.pi / 3)])
    prob = PlanarProblem(x)
    tmap = damped_newton(prob, np.full(7, prob.total_area() / 7))
    assert tmap.residual_inf < 1e-6
    # symmetry: all outer heights equal
    assert np.ptp(tmap.heights[1:]) < 1e-8


def test_solver_converges_and_logs(rng):
    prob = random_problem(rng, 20)
    nu = rng.uniform(0.5, 1.5, 20)
    nu *= prob.total_area() / nu.sum()
    seen = []
    tmap = damped_newton(prob, nu, log=seen.append)
    assert tmap.residual_inf < 1e-6
    assert len(seen) == tmap.iterations + 1
    res = [r.residual_inf for r in tmap.history]
    assert all(b < a for a, b in zip(res, res[1:]))
    for r in tmap.history:
        assert r.total_area == pytest.approx(prob.total_area(), rel=1e-9)
    text = history_csv(tmap.history)
    assert text.splitlines()[0] == ",".join(CSV_HEADER) == "iter,lambda,residual_inf,residual_l2,energy,millis"
    # the logged energy follows the quadrature energy along the run
    e_final = kantorovich_energy(prob, tmap.heights, nu)
    assert tmap.history[-1].energy == pytest.approx(e_final, abs=1e-6)
    assert dual_energy(prob, tmap.heights, nu) == pytest.approx(e_final, abs=1e-7)
    energies = [r.energy for r in tmap.history]
    assert all(b < a for a, b in zip(energies, energies[1:]))


def test_shift_invariance(rng):
    prob = random_problem(rng, 12)
    nu = rng.uniform(0.5, 1.5, 12)
    nu *= prob.total_area() / nu.sum()
    a = damped_newton(prob, nu)
    b = damped_newton(prob, nu, phi0=np.full(12, 5.0))
    np.testing.assert_allclose(a.heights - a.heights.mean(), b.heights - b.heights.mean(), atol=1e-8)
    np.testing.assert_allclose(prob.diagram(a.heights + 0.7).areas, a.diagram.areas, atol=1e-12)


def test_mass_mismatch_and_nonconvergence(rng):
    prob = random_problem(rng, 10)
    with pytest.raises(MeasureMismatchError):
        damped_newton(prob, np.ones(10))
    nu = rng.uniform(0.5, 1.5, 10)
    nu *= prob.total_area() / nu.sum()
    with pytest.raises(NonConvergenceError) as err:
        damped_newton(prob, nu, max_iters=2)
    assert len(err.value.state.history) == 3
    with pytest.raises(ValueError):
        damped_newton(prob, nu, lambda0=1.5)


def test_lookup(rng):
    prob = random_problem(rng, 10)
    nu = np.full(10, prob.total_area() / 10)
    tmap = damped_newton(prob, nu)
    for i in range(10):
        if not tmap.diagram.degenerate[i]:
            # the centroid of a convex cell is inside it
            c = cell_centroids(tmap.diagram)[i]
            assert tmap.lookup(c) == i
    pts = prob.domain.sample(2000, rng)
    p = power_distance(pts[:, None, :], prob.centers[None], tmap.heights[None])
    srt = np.sort(p, axis=1)
    clear = (srt[:, 1] - srt[:, 0]) > 1e-9
    got = np.array([tmap.lookup(q) for q in pts[clear]])
    assert np.array_equal(got, np.argmin(p[clear], axis=1))


def test_lookup_tie_goes_to_lower_index():
    x = np.array([polar_point(0.5, math.pi), polar_point(0.5, 0.0), polar_point(0.8, math.pi / 2)])
    prob = PlanarProblem(x)
    tmap = damped_newton(prob, prob.diagram(np.zeros(3)).areas)
    # a point on the bisector of the first two sites
    q = polar_point(0.05, math.pi / 2)
    assert tmap.lookup(q) == 0

"""Damped Newton solver for semi-discrete transport with cost ``ln cosh d``.

The unknowns are site heights ``phi``.  The convex energy ``E`` has gradient
``omega(phi) - nu`` where ``omega`` holds the cell areas of the power diagram,
and its Hessian is assembled edge by edge from the cell geometry.  Steps
``h = -H^+ (omega - nu)`` with ``sum(h) = 0`` are damped by halving until every
cell is non-degenerate and the max-norm residual decreases.
"""
from __future__ import annotations

import csv
import io
import time
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg
import scipy.sparse
import scipy.sparse.csgraph
import scipy.sparse.linalg

from .domain import ConvexDomain
from .errors import (
    GeometryError,
    InadmissibleStateError,
    MeasureMismatchError,
    NonConvergenceError,
    OutOfDomainError,
    SingularSystemError,
    StallError,
)
from .lorentz import check_hpoint, disk_to_hyperboloid, lorentz_inner, normalize
from .power_diagram import (
    PowerDiagram,
    build_power_diagram,
    check_sites,
    edge_weights,
    power_distance,
)
from .quadrature import integrate_polygons

CSV_HEADER = ["iter", "lambda", "residual_inf", "residual_l2", "energy", "millis"]
DENSE_LIMIT = 1500


def transport_cost(x, y):
    """Cost ``ln cosh d(x, y) = ln(-<x, y>)``; broadcasts."""
    return np.log(np.maximum(-lorentz_inner(x, y), 1.0))


class PlanarProblem:
    """Sites inside a convex domain of the hyperbolic plane."""

    mode = "planar"

    def __init__(self, centers, domain: ConvexDomain | None = None):
        centers = np.asarray(centers, dtype=float)
        if centers.ndim == 2 and centers.shape[0] >= 1:
            check_hpoint(centers)
        if len(centers) >= 2:
            check_sites(centers, np.zeros(len(centers)), min_sites=1)
        self.centers = centers
        if domain is None:
            domain = ConvexDomain.hull_of(centers)
        self.domain = domain
        self.n_sites = len(centers)

    def total_area(self) -> float:
        return self.domain.area()

    def diagram(self, heights) -> PowerDiagram:
        if self.n_sites == 1:
            return _single_cell(self.centers, heights, self.domain)
        return build_power_diagram(self.centers, heights, self.domain, check=False)

    def locate(self, x, heights) -> int:
        if not self.domain.contains(x[None])[0]:
            raise OutOfDomainError("point lies outside the transport domain")
        return argmin_power(x, self.centers, heights)

    def energy(self, heights, diagram, nu, level: int = 2) -> float:
        """Closed-form energy at ``heights``; ``diagram`` must belong to them."""
        base = self.__dict__.setdefault("_base_cost", {})
        if level not in base:
            base[level] = total_transport_cost(self.diagram(np.zeros(self.n_sites)), level)
        phi = np.asarray(heights, dtype=float)
        return (base[level] - total_transport_cost(diagram, level)
                + float(phi @ diagram.areas) - float(phi @ nu))


def _single_cell(centers, heights, domain):
    v = np.array(domain.vertices)
    n = len(v)
    d = PowerDiagram("planar", centers, np.asarray(heights, dtype=float), np.zeros(1, dtype=int), 1, None,
                     np.array([0, n]), v, np.full(n, -1))
    d.areas = np.array([domain.area()])
    d.degenerate = np.zeros(1, dtype=bool)
    d.bounded = np.ones(1, dtype=bool)
    d.domain = domain
    return d


def argmin_power(x, centers, heights, rel_tol: float = 1e-12) -> int:
    """Index of least power with ties (within ``rel_tol``) going to the lowest index."""
    vals = power_distance(np.asarray(x, dtype=float)[None, :], centers, heights)
    best = vals.min()
    return int(np.nonzero(vals <= best * (1.0 + rel_tol))[0][0])


@dataclass
class TargetMeasure:
    masses: np.ndarray

    def __post_init__(self):
        self.masses = np.asarray(self.masses, dtype=float).reshape(-1)
        if not np.all(self.masses > 0):
            raise MeasureMismatchError("target masses must be positive")

    @property
    def total(self) -> float:
        return float(self.masses.sum())

    def check_balance(self, total_area: float, rel_tol: float = 1e-9):
        if abs(self.total - total_area) > rel_tol * total_area:
            raise MeasureMismatchError(
                f"target mass {self.total!r} differs from domain area {total_area!r}")

    def normalized_to(self, total_area: float) -> tuple["TargetMeasure", float]:
        scale = total_area / self.total
        return TargetMeasure(self.masses * scale), scale


@dataclass
class IterationRecord:
    iteration: int
    step: float
    residual_inf: float
    residual_l2: float
    energy: float
    millis: float
    rel_error: float
    total_area: float


@dataclass
class SolveState:
    heights: np.ndarray
    diagram: PowerDiagram
    target: np.ndarray
    history: list = field(default_factory=list)

    @property
    def areas(self) -> np.ndarray:
        return self.diagram.areas

    @property
    def residual(self) -> np.ndarray:
        return self.diagram.areas - self.target

    @property
    def residual_inf(self) -> float:
        return float(np.abs(self.residual).max())

    @property
    def residual_l2(self) -> float:
        return float(np.sqrt(np.sum(self.residual ** 2)))

    @property
    def max_relative_error(self) -> float:
        return float(np.max(np.abs(self.residual) / self.target))

    def log_csv(self) -> str:
        return history_csv(self.history)


@dataclass
class TransportMap:
    problem: object
    heights: np.ndarray
    diagram: PowerDiagram
    target: np.ndarray
    history: list
    iterations: int

    @property
    def residual_inf(self) -> float:
        return float(np.abs(self.diagram.areas - self.target).max())

    def cost(self, level: int = 2) -> float:
        return total_transport_cost(self.diagram, level=level)

    def lookup(self, x) -> int:
        return lookup(self, x)


def history_csv(history) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_HEADER)
    for r in history:
        w.writerow([r.iteration, _fmt(r.step), _fmt(r.residual_inf), _fmt(r.residual_l2),
                    _fmt(r.energy), _fmt(r.millis)])
    return buf.getvalue()


def _fmt(x: float) -> str:
    return format(float(x), ".17g")


def _check_admissible(diagram: PowerDiagram):
    if np.any(diagram.degenerate):
        bad = np.nonzero(diagram.degenerate)[0]
        raise InadmissibleStateError(f"cells {bad[:10].tolist()} are empty or degenerate")


def gradient(state_or_diagram, target=None) -> np.ndarray:
    """``omega - nu``, the gradient of the convex energy."""
    if isinstance(state_or_diagram, SolveState):
        diagram, target = state_or_diagram.diagram, state_or_diagram.target
    else:
        diagram = state_or_diagram
    _check_admissible(diagram)
    return diagram.areas - np.asarray(target, dtype=float)


def hessian(state_or_diagram, sparse: bool = False):
    """Energy Hessian ``d omega_i / d phi_j``: symmetric, PSD, zero row sums."""
    diagram = state_or_diagram.diagram if isinstance(state_or_diagram, SolveState) else state_or_diagram
    _check_admissible(diagram)
    n = diagram.n_sites
    i, j, w = edge_weights(diagram)
    # every interior edge is seen from both of its cells; average the two
    off = scipy.sparse.coo_matrix((w, (i, j)), shape=(n, n)).tocsr()
    off = 0.5 * (off + off.T)
    diag = -np.asarray(off.sum(axis=1)).ravel()
    hmat = (scipy.sparse.diags(diag) + off).tocsr()
    return hmat.tocsr() if sparse else hmat.toarray()


def _components(hmat) -> int:
    graph = scipy.sparse.csr_matrix(hmat)
    graph.data = np.abs(graph.data)
    ncomp, _ = scipy.sparse.csgraph.connected_components(graph, directed=False)
    return ncomp


def newton_step(hmat, grad, rtol: float = 1e-12, guess=None) -> np.ndarray:
    """Direction ``h`` with ``H h = -g`` on the complement of the constants, ``sum(h) = 0``.

    The rank-one term ``s 11^T / n`` lifts the constant null vector so the
    system becomes definite; the solution then automatically sums to zero
    because ``g`` does.  ``guess`` only seeds the iterative solver.
    """
    grad = np.asarray(grad, dtype=float)
    n = grad.shape[0]
    if n == 1:
        return np.zeros(1)
    g = grad - grad.mean()
    if not np.any(g):
        return np.zeros(n)
    if scipy.sparse.issparse(hmat):
        if _components(hmat) > 1:
            raise SingularSystemError("adjacency graph is disconnected")
        diag = hmat.diagonal()
        shift = float(np.mean(diag))
        if n <= DENSE_LIMIT:
            dense = hmat.toarray() + shift / n
            return _dense_solve(dense, g)
        ones = np.ones(n)

        def matvec(v):
            return hmat @ v + shift * ones * (v.sum() / n)

        op = scipy.sparse.linalg.LinearOperator((n, n), matvec=matvec, dtype=float)
        pre = scipy.sparse.linalg.LinearOperator((n, n), matvec=lambda v: v / (diag + shift / n), dtype=float)
        h, info = scipy.sparse.linalg.cg(op, -g, x0=guess, rtol=rtol, atol=0.0, maxiter=20 * n, M=pre)
        if info != 0:
            raise SingularSystemError("conjugate gradients did not converge")
        return h - h.mean()
    hmat = np.asarray(hmat, dtype=float)
    if _components(hmat) > 1:
        raise SingularSystemError("adjacency graph is disconnected")
    shift = float(np.mean(np.diag(hmat)))
    return _dense_solve(hmat + shift / n, g)


def _dense_solve(mat, g):
    try:
        c = scipy.linalg.cho_factor(mat)
        h = -scipy.linalg.cho_solve(c, g)
    except np.linalg.LinAlgError:
        raise SingularSystemError("Hessian is not definite on the complement of the constants") from None
    return h - h.mean()


def damped_newton(problem, target, lambda0: float = 0.5, eps: float = 1e-6, max_iters: int = 200,
                  phi0=None, min_step: float = 1e-12, log=None) -> TransportMap:
    """Heights whose power cells carry the target masses.

    ``problem`` supplies ``diagram(heights)`` and ``total_area()``.  Every
    iteration starts from the step ``lambda0`` and halves it until the new
    state is admissible and its max-norm residual is strictly smaller.
    """
    if not 0 < lambda0 <= 1:
        raise ValueError("lambda0 must lie in (0, 1]")
    if not eps > 0:
        raise ValueError("eps must be positive")
    if not isinstance(target, TargetMeasure):
        target = TargetMeasure(target)
    n = problem.n_sites
    if target.masses.shape[0] != n:
        raise MeasureMismatchError("one target mass per site is required")
    area = problem.total_area()
    target.check_balance(area)
    nu = target.masses
    phi = np.zeros(n) if phi0 is None else np.array(phi0, dtype=float).reshape(n)
    phi -= phi.mean()
    t0 = time.perf_counter()
    diagram = problem.diagram(phi)
    _check_admissible(diagram)
    state = SolveState(phi, diagram, nu)
    exact_energy = getattr(problem, "energy", None)
    if exact_energy is not None:
        energy = exact_energy(phi, diagram, nu)
    else:
        energy = 0.0 if phi0 is None else float("nan")
    history = state.history

    def record(it, step):
        history.append(IterationRecord(it, step, state.residual_inf, state.residual_l2, energy,
                                       1000.0 * (time.perf_counter() - t0), state.max_relative_error,
                                       float(state.areas.sum())))
        if log is not None:
            log(history[-1])

    record(0, 0.0)
    it = 0
    guess = None
    hmat = hessian(state.diagram, sparse=n > DENSE_LIMIT) if state.residual_inf >= eps else None
    while state.residual_inf >= eps:
        if it >= max_iters:
            raise NonConvergenceError(f"no convergence within {max_iters} iterations", state)
        it += 1
        t0 = time.perf_counter()
        g = state.residual
        h = newton_step(hmat, g, guess=guess)
        lam = lambda0
        while True:
            trial_phi = state.heights + lam * h
            trial = problem.diagram(trial_phi)
            if not np.any(trial.degenerate):
                res = float(np.abs(trial.areas - nu).max())
                if res < state.residual_inf:
                    break
            lam *= 0.5
            if lam < min_step:
                raise StallError(f"step size fell below {min_step} at iteration {it}")
        new_hmat = hessian(trial, sparse=n > DENSE_LIMIT)
        if exact_energy is not None:
            energy = exact_energy(trial_phi, trial, nu)
        else:
            # energy change along the accepted segment: trapezoid rule with the
            # endpoint derivative correction, exact for cubic integrands
            g1 = trial.areas - nu
            slope0 = float(h @ (hmat @ h))
            slope1 = float(h @ (new_hmat @ h))
            energy += 0.5 * lam * float(h @ (g + g1)) - lam * lam / 12.0 * (slope1 - slope0)
        state.heights = trial_phi
        state.diagram = trial
        hmat = new_hmat
        # a step of length lam leaves about (1 - lam) of the residual to remove
        guess = (1.0 - lam) * h
        record(it, lam)
    return TransportMap(problem, state.heights, state.diagram, nu, history, it)


def kantorovich_energy(problem, heights, target, nodes: int = 64) -> float:
    """Energy ``int_0^1 sum_i omega_i(t phi) phi_i dt - sum_i phi_i nu_i``.

    Gauss-Legendre quadrature along the straight path from zero.
    """
    phi = np.asarray(heights, dtype=float)
    nu = np.asarray(target.masses if isinstance(target, TargetMeasure) else target, dtype=float)
    t, w = np.polynomial.legendre.leggauss(nodes)
    t = 0.5 * (t + 1.0)
    w = 0.5 * w
    total = 0.0
    for tk, wk in zip(t, w):
        d = problem.diagram(tk * phi)
        if np.any(d.degenerate):
            raise InadmissibleStateError("path from zero leaves the admissible set")
        total += wk * float(np.dot(d.areas, phi))
    return total - float(np.dot(phi, nu))


def dual_energy(problem, heights, target, level: int = 4) -> float:
    """Same energy in closed form from cell integrals of the cost.

    ``E(phi) = C(0) - C(phi) + phi . omega(phi) - phi . nu`` where ``C`` is
    the total cost of the power diagram.  Planar problems only.
    """
    if getattr(problem, "mode", None) != "planar":
        raise ValueError("closed-form energy needs a planar problem")
    nu = np.asarray(target.masses if isinstance(target, TargetMeasure) else target, dtype=float)
    d = problem.diagram(heights)
    _check_admissible(d)
    return problem.energy(heights, d, nu, level)


def total_transport_cost(diagram: PowerDiagram, level: int = 2) -> float:
    """Sum over cells of the integral of ``ln cosh d(x, site)``."""
    centers = diagram.points[: diagram.n_sites]

    def integrand(pts, owner):
        return transport_cost(pts, centers[owner])

    per_cell = integrate_polygons(diagram.cell_offsets, diagram.cell_vertices, integrand, level)
    return float(per_cell.sum())


def cell_centroids(diagram: PowerDiagram, level: int = 2) -> np.ndarray:
    """Lorentzian mass centres ``normalize(int_cell x dA)`` of every cell."""
    moments = integrate_polygons(diagram.cell_offsets, diagram.cell_vertices, lambda p, o: p, level)
    out = np.full((diagram.n_sites, 3), np.nan)
    ok = np.diff(diagram.cell_offsets) >= 3
    out[ok] = normalize(moments[ok])
    return out


def lookup(tmap: TransportMap, x) -> int:
    """Site whose cell contains ``x`` (a point on the sheet or in the disk)."""
    x = np.asarray(x, dtype=float)
    if x.shape == (2,):
        x = disk_to_hyperboloid(x)
    else:
        x = check_hpoint(x)
    return tmap.problem.locate(x, tmap.heights)

"""Command line front end.

    hyperot hpd SITES.json              power diagram dump (+ SVG)
    hyperot solve SITES.json [TARGET]   transport map, convergence CSV, before/after SVG
    hyperot parametrize MESH.obj        surface parametrization (needs MESH.metric.json)
    hyperot render DUMP.json            SVG of any dump written above

Exit codes: 0 ok, 2 bad input, 3 geometry failure, 4 no convergence.
"""
from __future__ import annotations

import argparse
import logging
import math
import os
import sys

import numpy as np

from . import io as hio
from .domain import ConvexDomain
from .errors import GeometryError, HyperOTError, InputError
from .lorentz import disk_to_hyperboloid, hyperboloid_to_disk, signed_triangle_area
from .power_diagram import build_hull, build_power_diagram, diagram_to_dict
from .solver import PlanarProblem, TargetMeasure, cell_centroids, damped_newton, history_csv
from .svg import render_svg, write_svg

log = logging.getLogger("hyperot")

PLANAR_MODES = ("euclidean-face-area", "hyperbolic-face-area", "uniform", "file")


def _disk_area(z):
    a, b, c = z[:, 0], z[:, 1], z[:, 2]
    return 0.5 * np.abs((b[:, 0] - a[:, 0]) * (c[:, 1] - a[:, 1]) - (b[:, 1] - a[:, 1]) * (c[:, 0] - a[:, 0]))


def delaunay_triangles(centers) -> np.ndarray:
    """Triangles of the unweighted hyperbolic Delaunay triangulation."""
    return build_hull(centers, np.zeros(len(centers))).triangles()


def planar_target(centers, mode: str, masses=None) -> np.ndarray:
    """Raw (unnormalized) target masses for planar sites.

    The face-area modes give each site a third of the area of every Delaunay
    triangle it belongs to, measured in the disk picture or hyperbolically.
    """
    n = len(centers)
    if mode == "uniform":
        return np.ones(n)
    if mode == "file":
        if masses is None:
            raise InputError("target mode 'file' needs a target file")
        m = np.asarray(masses, dtype=float)
        if m.shape != (n,):
            raise InputError(f"target file has {m.size} masses for {n} sites")
        if not np.all(m > 0):
            raise InputError("target masses must be positive")
        return m
    if mode not in PLANAR_MODES:
        raise InputError(f"unknown target mode {mode!r}")
    tri = delaunay_triangles(centers)
    if mode == "euclidean-face-area":
        area = _disk_area(hyperboloid_to_disk(centers)[tri])
    else:
        area = signed_triangle_area(centers[tri[:, 0]], centers[tri[:, 1]], centers[tri[:, 2]])
    nu = np.zeros(n)
    np.add.at(nu, tri.ravel(), np.repeat(np.abs(area) / 3.0, 3))
    if np.any(nu <= 0):
        raise GeometryError("some site belongs to no Delaunay triangle")
    return nu


def default_domain(centers) -> ConvexDomain:
    """Convex hull of the sites; a disk of radius 0.9 when they span no area."""
    try:
        return ConvexDomain.hull_of(centers)
    except GeometryError:
        ang = 2 * math.pi * np.arange(64) / 64
        return ConvexDomain.from_disk(0.9 * np.column_stack([np.cos(ang), np.sin(ang)]))


def _load_sites(path):
    disk, heights, dom = hio.read_sites(path)
    if np.any(np.sum(disk * disk, axis=1) >= 1.0):
        raise InputError(f"{path}: every site must lie inside the unit disk")
    centers = disk_to_hyperboloid(disk)
    domain = ConvexDomain.from_disk(dom) if dom is not None else default_domain(centers)
    return centers, heights, domain


def _dump_diagram(d, centroids=None) -> dict:
    out = diagram_to_dict(d)
    if centroids is not None:
        out["centroids"] = [None if not np.all(np.isfinite(c)) else list(c) for c in hyperboloid_to_disk(centroids)]
    return out


def _out(args, name):
    os.makedirs(args.out_dir, exist_ok=True)
    return os.path.join(args.out_dir, name)


def cmd_hpd(args) -> int:
    centers, heights, domain = _load_sites(args.sites)
    d = build_power_diagram(centers, heights, domain)
    dump = _dump_diagram(d)
    hio.write_json(_out(args, "diagram.json"), dump)
    if not args.no_svg:
        write_svg(_out(args, "diagram.svg"), dump)
    log.info("%d sites, %d adjacent pairs", d.n_sites, len(dump["adjacency"]))
    return 0


def _solve_log(records):
    def cb(rec):
        records.append(rec)
        log.info("iter %d  lambda %.4g  residual %.3e", rec.iteration, rec.step, rec.residual_inf)
    return cb


def _write_csv(path, records):
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(history_csv(records))


def cmd_solve(args) -> int:
    centers, heights, domain = _load_sites(args.sites)
    problem = PlanarProblem(centers, domain)
    mode, masses = args.target_mode, None
    if args.target:
        file_mode, masses = hio.read_target(args.target)
        if file_mode == "file":
            mode = "file"
        elif args.target_mode is None:
            mode = file_mode
    mode = mode or "euclidean-face-area"
    raw = planar_target(centers, mode, masses)
    nu, scale = TargetMeasure(raw).normalized_to(problem.total_area())
    log.info("target mode %s, scaled by %.17g to the domain area", mode, scale)
    before = problem.diagram(np.zeros(problem.n_sites))
    records = []
    csv_path = _out(args, "convergence.csv")
    try:
        tmap = damped_newton(problem, nu, lambda0=args.lambda0, eps=args.eps, max_iters=args.max_iters,
                             log=_solve_log(records))
    finally:
        # the log is written even when the solver gives up
        _write_csv(csv_path, records)
    write_svg(_out(args, "before.svg"), _dump_diagram(before, cell_centroids(before)))
    cents = cell_centroids(tmap.diagram)
    dump = _dump_diagram(tmap.diagram, cents)
    dump.update({
        "target_mode": mode,
        "target_scale": scale,
        "target": nu.masses.tolist(),
        "iterations": tmap.iterations,
        "residual_inf": tmap.residual_inf,
    })
    hio.write_json(_out(args, "map.json"), dump)
    write_svg(_out(args, "after.svg"), dump)
    return 0


def cmd_parametrize(args) -> int:
    from .fuchsian import embed_domain
    from .parametrize import TARGET_MODES, parametrize

    mesh = hio.read_metric_mesh(args.mesh, args.sidecar)
    mode = args.target_mode or "hyperbolic-face-area"
    masses = None
    if args.target:
        file_mode, masses = hio.read_target(args.target)
        mode = file_mode if file_mode == "file" else mode
    if mode not in TARGET_MODES + ("file",):
        raise InputError(f"unknown target mode {mode!r}")
    mesh.validate()
    dom = embed_domain(mesh).recentred()
    records = []
    csv_path = _out(args, "convergence.csv")
    try:
        res = parametrize(mesh, mode, masses, lambda0=args.lambda0, eps=args.eps, max_iters=args.max_iters,
                          tile_depth=args.tile_depth, log=_solve_log(records), domain=dom)
    finally:
        _write_csv(csv_path, records)
    hio.write_json(_out(args, "parametrization.json"), res.to_dict())
    d = res.transport.diagram
    boundary = [{"label": s.label, "points": hyperboloid_to_disk(s.positions).tolist()} for s in dom.sides]
    cells = _dump_diagram(d, res.positions)
    cells["boundary"] = boundary
    hio.write_json(_out(args, "diagram.json"), cells)
    write_svg(_out(args, "domain.svg"), cells)
    tiles = []
    for g in res.problem.patch().elements[1:]:
        for i in range(d.n_sites):
            verts, _ = d.cell(i)
            if len(verts) >= 3:
                tiles.append(hyperboloid_to_disk(g.apply(verts)).tolist())
    tiled = dict(cells)
    tiled["tiles"] = tiles
    write_svg(_out(args, "tiled.svg"), tiled)
    base = os.path.splitext(os.path.basename(args.mesh))[0]
    hio.write_obj(_out(args, base + "_uv.obj"),
                  mesh.positions if mesh.positions is not None else np.zeros((mesh.n_vertices, 3)),
                  mesh.faces, uv=res.disk)
    return 0


def cmd_render(args) -> int:
    dump = hio.read_json(args.dump)
    if not isinstance(dump, dict):
        raise InputError(f"{args.dump}: expected a diagram dump object")
    out = args.output or os.path.splitext(args.dump)[0] + ".svg"
    text = render_svg(dump)
    with open(out, "w", encoding="utf-8") as fh:
        fh.write(text)
    return 0


def _positive(kind):
    def conv(s):
        v = kind(s)
        if not v > 0:
            raise argparse.ArgumentTypeError("must be positive")
        return v
    return conv


def _lambda0(s):
    v = float(s)
    if not 0 < v <= 1:
        raise argparse.ArgumentTypeError("must lie in (0, 1]")
    return v


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="hyperot", description="Hyperbolic semi-discrete optimal transport")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, solver=True):
        sp.add_argument("--out-dir", default=".", help="directory for the outputs")
        sp.add_argument("--seed", type=int, default=0, help="recorded for reproducibility; the run is deterministic")
        if solver:
            sp.add_argument("--lambda0", type=_lambda0, default=0.5)
            sp.add_argument("--eps", type=_positive(float), default=1e-6)
            sp.add_argument("--max-iters", type=_positive(int), default=200)

    sp = sub.add_parser("hpd", help="power diagram of weighted sites")
    sp.add_argument("sites")
    sp.add_argument("--no-svg", action="store_true")
    common(sp, solver=False)
    sp.set_defaults(func=cmd_hpd)

    sp = sub.add_parser("solve", help="transport map from the disk region to the sites")
    sp.add_argument("sites")
    sp.add_argument("target", nargs="?")
    sp.add_argument("--target-mode", choices=PLANAR_MODES, default=None)
    common(sp)
    sp.set_defaults(func=cmd_solve)

    sp = sub.add_parser("parametrize", help="area-preserving parametrization of a hyperbolic surface mesh")
    sp.add_argument("mesh")
    sp.add_argument("--sidecar", default=None, help="metric JSON (default: MESH.metric.json)")
    sp.add_argument("--target", default=None, help="target masses JSON")
    sp.add_argument("--target-mode", default=None,
                    choices=("euclidean-face-area", "hyperbolic-face-area", "uniform", "file"))
    sp.add_argument("--tile-depth", type=_positive(int), default=None)
    common(sp)
    sp.set_defaults(func=cmd_parametrize)

    sp = sub.add_parser("render", help="SVG of a dump")
    sp.add_argument("dump")
    sp.add_argument("-o", "--output", default=None)
    sp.set_defaults(func=cmd_render)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    try:
        return args.func(args)
    except HyperOTError as exc:
        print(f"hyperot: {exc}", file=sys.stderr)
        return exc.exit_code
    except OSError as exc:
        print(f"hyperot: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())

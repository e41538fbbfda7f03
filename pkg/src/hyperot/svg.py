"""SVG pictures of diagrams in the Poincare disk.

Geodesics are drawn as circular arcs orthogonal to the unit circle, or as
straight segments when they pass through the origin.  Coordinates are
printed with a fixed number of decimals so the same dump always gives the
same bytes.
"""
from __future__ import annotations

import math

import numpy as np

SIZE = 800.0
MARGIN = 10.0
COLLINEAR_TOL = 1e-12

CELL_COLOR = "#1f4fd8"
CENTROID_COLOR = "#1a9a2a"
SITE_COLOR = "#222222"
SIDE_COLOR = "#c0392b"


def geodesic_arc(z1, z2):
    """Circle carrying the geodesic between two disk points.

    Returns ``None`` for a diameter, else ``(centre, radius)`` of the circle
    through both points orthogonal to the unit circle
    (``|centre|^2 = radius^2 + 1``).
    """
    z1 = np.asarray(z1, dtype=float)
    z2 = np.asarray(z2, dtype=float)
    det = z1[0] * z2[1] - z1[1] * z2[0]
    if abs(det) <= COLLINEAR_TOL * np.linalg.norm(z1) * np.linalg.norm(z2):
        return None
    # c . z = (|z|^2 + 1) / 2 for both points
    rhs = 0.5 * np.array([z1 @ z1 + 1.0, z2 @ z2 + 1.0])
    c = np.linalg.solve(np.array([z1, z2]), rhs)
    return c, math.sqrt(max(c @ c - 1.0, 0.0))


def _xy(z):
    half = 0.5 * SIZE - MARGIN
    return MARGIN + half * (1.0 + z[0]), MARGIN + half * (1.0 - z[1])


def _f(x):
    s = f"{x:.4f}"
    return "0.0000" if s == "-0.0000" else s


def _arc_to(z1, z2) -> str:
    x2, y2 = _xy(z2)
    circ = geodesic_arc(z1, z2)
    if circ is None:
        return f"L {_f(x2)} {_f(y2)}"
    c, r = circ
    half = 0.5 * SIZE - MARGIN
    rs = r * half
    if rs > 1e6:
        return f"L {_f(x2)} {_f(y2)}"
    # screen y points down, so the orientation flips
    u, v = np.asarray(z1) - c, np.asarray(z2) - c
    sweep = 1 if u[0] * v[1] - u[1] * v[0] < 0 else 0
    return f"A {_f(rs)} {_f(rs)} 0 0 {sweep} {_f(x2)} {_f(y2)}"


def geodesic_path(points, closed: bool = False) -> str:
    """Path data for a chain of geodesic segments through disk points."""
    pts = np.asarray(points, dtype=float)
    x0, y0 = _xy(pts[0])
    parts = [f"M {_f(x0)} {_f(y0)}"]
    seq = list(pts[1:]) + ([pts[0]] if closed else [])
    prev = pts[0]
    for z in seq:
        parts.append(_arc_to(prev, z))
        prev = z
    if closed:
        parts.append("Z")
    return " ".join(parts)


def _dot(z, r, color, cls):
    x, y = _xy(z)
    return f'<circle class="{cls}" cx="{_f(x)}" cy="{_f(y)}" r="{_f(r)}" fill="{color}"/>'


def render_svg(dump: dict) -> str:
    """SVG text for a diagram dump.

    Understood keys: ``cells`` (each with disk ``vertices``), ``sites``,
    ``centroids``, ``boundary`` (list of ``{"label", "points"}`` side chains)
    and ``tiles`` (extra cell polygons drawn faintly).
    """
    c = 0.5 * SIZE
    half = c - MARGIN
    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{int(SIZE)}" height="{int(SIZE)}" '
        f'viewBox="0 0 {int(SIZE)} {int(SIZE)}">',
        '<rect width="100%" height="100%" fill="white"/>',
        f'<circle class="boundary" cx="{_f(c)}" cy="{_f(c)}" r="{_f(half)}" fill="none" stroke="black" '
        'stroke-width="1.5"/>',
    ]
    for poly in dump.get("tiles", []):
        if len(poly) >= 2:
            out.append(f'<path class="tile" d="{geodesic_path(poly, closed=True)}" fill="none" '
                       f'stroke="{CELL_COLOR}" stroke-opacity="0.35" stroke-width="0.5"/>')
    for cell in dump.get("cells", []):
        verts = cell["vertices"] if isinstance(cell, dict) else cell
        if len(verts) >= 2:
            out.append(f'<path class="cell" d="{geodesic_path(verts, closed=True)}" fill="none" '
                       f'stroke="{CELL_COLOR}" stroke-width="1"/>')
    for side in dump.get("boundary", []):
        out.append(f'<path class="side" data-label="{side["label"]}" d="{geodesic_path(side["points"])}" '
                   f'fill="none" stroke="{SIDE_COLOR}" stroke-width="2"/>')
    for z in dump.get("sites", []):
        out.append(_dot(z, 1.5, SITE_COLOR, "site"))
    for z in dump.get("centroids", []):
        if z is not None and all(math.isfinite(t) for t in z):
            out.append(_dot(z, 2.5, CENTROID_COLOR, "centroid"))
    out.append("</svg>")
    return "\n".join(out) + "\n"


def write_svg(path, dump: dict):
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(render_svg(dump))

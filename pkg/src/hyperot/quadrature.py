"""Integration over geodesic polygons with respect to hyperbolic area.

Geodesic triangles are straight in the Klein model, where the area element is
``(1 - |k|^2)^(-3/2) dk``.  Each triangle is first moved so that its centroid
sits at the apex, where that density is flattest, then integrated with the
symmetric 7-point degree-5 rule, optionally after uniform subdivision.
"""
from __future__ import annotations

import numpy as np

from .lorentz import hyperboloid_to_klein, normalize

# barycentric nodes and weights (weights sum to one)
_A1, _B1 = 0.059715871789770, 0.470142064105115
_A2, _B2 = 0.797426985353087, 0.101286507323456
_W0, _W1, _W2 = 0.225, 0.132394152788506, 0.125939180544827
BARY = np.array([
    [1 / 3, 1 / 3, 1 / 3],
    [_A1, _B1, _B1], [_B1, _A1, _B1], [_B1, _B1, _A1],
    [_A2, _B2, _B2], [_B2, _A2, _B2], [_B2, _B2, _A2],
])
WEIGHTS = np.array([_W0, _W1, _W1, _W1, _W2, _W2, _W2])
# inverse boost = J B^T J = B with the off-diagonal last row/column negated
_FLIP = np.array([[1.0, 1.0, -1.0], [1.0, 1.0, -1.0], [-1.0, -1.0, 1.0]])


def _subdivide(a, b, c, level):
    """Split Klein triangles (arrays of shape (m, 2)) into 4**level pieces."""
    for _ in range(level):
        ab = 0.5 * (a + b)
        bc = 0.5 * (b + c)
        ca = 0.5 * (c + a)
        a, b, c = (np.concatenate(x) for x in ((a, ab, ca, ab), (ab, b, bc, bc), (ca, bc, c, ca)))
    return a, b, c


def _boosts(centres):
    """Matrices of the boosts taking the apex to each centre (shape (m, 3, 3))."""
    c1, c2, c3 = centres[:, 0], centres[:, 1], centres[:, 2]
    k = 1.0 / (1.0 + c3)
    m = np.empty((len(centres), 3, 3))
    m[:, 0, 0] = 1.0 + c1 * c1 * k
    m[:, 0, 1] = m[:, 1, 0] = c1 * c2 * k
    m[:, 1, 1] = 1.0 + c2 * c2 * k
    m[:, 0, 2] = m[:, 2, 0] = c1
    m[:, 1, 2] = m[:, 2, 1] = c2
    m[:, 2, 2] = c3
    return m


def triangle_nodes(a, b, c, level: int = 0):
    """Quadrature nodes on the sheet and area weights for geodesic triangles.

    ``a, b, c`` are arrays of shape ``(m, 3)`` on the sheet.  Returns
    ``(points, weights, owner)`` where ``owner`` maps each node to its input
    triangle.  Weights carry the sign of the Klein orientation.
    """
    a, b, c = (np.atleast_2d(np.asarray(v, dtype=float)) for v in (a, b, c))
    centre = normalize(a + b + c)
    boost = _boosts(centre)
    inv = boost * _FLIP
    ka, kb, kc = (hyperboloid_to_klein(np.matmul(inv, v[:, :, None])[:, :, 0]) for v in (a, b, c))
    m = ka.shape[0]
    owner = np.arange(m)
    if level:
        reps = 4 ** level
        ka, kb, kc = _subdivide(ka, kb, kc, level)
        owner = np.tile(owner, reps)
    e1 = kb - ka
    e2 = kc - ka
    jac = 0.5 * (e1[:, 0] * e2[:, 1] - e1[:, 1] * e2[:, 0])
    kx = ka[:, 0, None] * BARY[:, 0] + kb[:, 0, None] * BARY[:, 1] + kc[:, 0, None] * BARY[:, 2]
    ky = ka[:, 1, None] * BARY[:, 0] + kb[:, 1, None] * BARY[:, 1] + kc[:, 1, None] * BARY[:, 2]
    s = 1.0 / np.sqrt(1.0 - kx * kx - ky * ky)
    # subdivision keeps the pieces of triangle t at rows t, t + m0, t + 2 m0, ...
    m0 = len(centre)
    kx, ky, kz = (v.reshape(-1, m0, 7) * s.reshape(-1, m0, 7) for v in (kx, ky, np.ones_like(s)))
    bm = boost[None, :, :, :, None]
    pts = np.stack([bm[:, :, i, 0] * kx + bm[:, :, i, 1] * ky + bm[:, :, i, 2] * kz for i in range(3)], axis=-1)
    pts = pts.reshape(-1, 7, 3)
    w = WEIGHTS[None, :] * jac[:, None] * s ** 3
    return pts.reshape(-1, 3), w.reshape(-1), np.repeat(owner, 7)


def polygon_nodes(offsets, verts, level: int = 0):
    """Nodes and weights for polygons in CSR form; ``owner`` is the polygon index."""
    nc = len(offsets) - 1
    sizes = np.diff(offsets)
    cell = np.repeat(np.arange(nc), sizes)
    local = np.arange(len(verts)) - offsets[:-1][cell]
    use = np.nonzero((local >= 1) & (local <= sizes[cell] - 2))[0]
    if len(use) == 0:
        return np.zeros((0, 3)), np.zeros(0), np.zeros(0, dtype=int)
    v0 = verts[offsets[:-1][cell[use]]]
    pts, w, tri_owner = triangle_nodes(v0, verts[use], verts[use + 1], level)
    return pts, w, cell[use][tri_owner]


def integrate_polygons(offsets, verts, func, level: int = 1):
    """Integral of ``func(points, owner)`` over each polygon; returns shape (n,) or (n, d)."""
    pts, w, owner = polygon_nodes(offsets, verts, level)
    vals = np.asarray(func(pts, owner), dtype=float)
    nc = len(offsets) - 1
    wv = vals * w.reshape((-1,) + (1,) * (vals.ndim - 1))
    if wv.ndim == 1:
        return np.bincount(owner, wv, minlength=nc)
    flat = wv.reshape(len(wv), -1)
    cols = [np.bincount(owner, flat[:, k], minlength=nc) for k in range(flat.shape[1])]
    return np.stack(cols, axis=1).reshape((nc,) + vals.shape[1:])

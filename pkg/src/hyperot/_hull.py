"""Weighted Delaunay triangulation as a convex hull, built by flips.

The faces of ``conv{z_i}`` that are visible from the origin form the
weighted Delaunay triangulation of the sites.  Projectively these are the
upper faces of the points ``(z1/z3, z2/z3, 1/z3)``, so the origin is added
as a vertex with homogeneous weight -1 (a point at infinity below), which
closes the surface into a triangulated sphere.  Faces through the origin
are ghost faces sitting on edges of the Klein-model convex hull.  Faces
are stored counterclockwise as seen from outside.  A new point is located by
walking along the ray from an interior reference point, the face it sees is
split in three, and Lawson style 2-2 / 3-1 flips restore local convexity.
Points that end up inside the hull are flagged as hidden.
"""
import numpy as np
from numba import njit

HIDDEN = -2
UNSET = -1


@njit(cache=True, inline="always")
def _orient(p, a, b, c, d):
    """det[b - a, c - a, d - a] and a scale for relative tolerances."""
    ax, ay, az = p[a, 0], p[a, 1], p[a, 2]
    bx, by, bz = p[b, 0] - ax, p[b, 1] - ay, p[b, 2] - az
    cx, cy, cz = p[c, 0] - ax, p[c, 1] - ay, p[c, 2] - az
    dx, dy, dz = p[d, 0] - ax, p[d, 1] - ay, p[d, 2] - az
    det = bx * (cy * dz - cz * dy) - by * (cx * dz - cz * dx) + bz * (cx * dy - cy * dx)
    nb = abs(bx) + abs(by) + abs(bz)
    nc = abs(cx) + abs(cy) + abs(cz)
    nd = abs(dx) + abs(dy) + abs(dz)
    o = p.shape[0] - 2
    if a == o or b == o or c == o or d == o:
        # the origin enters with homogeneous weight -1
        det = -det
    return det, nb * nc * nd


@njit(cache=True)
def _sign(p, a, b, c, d, eps):
    det, scale = _orient(p, a, b, c, d)
    if det > eps * scale:
        return 1
    if det < -eps * scale:
        return -1
    return 0


@njit(cache=True, inline="always")
def _replace_nbr(nbr, t, old, new):
    for k in range(3):
        if nbr[t, k] == old:
            nbr[t, k] = new
            return


@njit(cache=True)
def _new_tri(tri, nbr, alive, free, nfree, ntri):
    if nfree[0] > 0:
        nfree[0] -= 1
        t = free[nfree[0]]
    else:
        t = ntri[0]
        ntri[0] += 1
    alive[t] = True
    return t


@njit(cache=True)
def _locate(p, q, tri, nbr, alive, start, eps, ntri):
    """Face whose cone from the reference point ``p[-1]`` holds the ray to ``q``.

    Returns -1 if the walk fails (caller falls back to a scan).
    """
    cref = p.shape[0] - 1
    t = start
    maxsteps = 4 * ntri + 16
    for step in range(maxsteps):
        moved = False
        for e in range(3):
            k = (e + step) % 3
            a = tri[t, (k + 1) % 3]
            b = tri[t, (k + 2) % 3]
            det, scale = _orient(p, cref, a, b, q)
            if det < -eps * scale:
                t = nbr[t, k]
                moved = True
                break
        if not moved:
            return t
    return -1


@njit(cache=True)
def _flip_loop(p, tri, nbr, alive, free, nfree, ntri, stack, sp, q, status, eps):
    cref = p.shape[0] - 1
    guard = 0
    while sp > 0:
        guard += 1
        if guard > 100000000:
            return False, stack
        sp -= 1
        t = stack[sp]
        if not alive[t]:
            continue
        kp = -1
        for k in range(3):
            if tri[t, k] == q:
                kp = k
        if kp < 0:
            continue
        a = tri[t, (kp + 1) % 3]
        b = tri[t, (kp + 2) % 3]
        u = nbr[t, kp]
        ku = -1
        for k in range(3):
            v = tri[u, k]
            if v != a and v != b:
                ku = k
        d = tri[u, ku]
        if _sign(p, a, b, q, d, eps) <= 0:
            continue
        n_t_a = nbr[t, (kp + 1) % 3]
        n_t_b = nbr[t, (kp + 2) % 3]
        n_u_b = nbr[u, (ku + 1) % 3]
        n_u_a = nbr[u, (ku + 2) % 3]
        ok_a = _sign(p, cref, a, d, q, eps) > 0
        ok_b = _sign(p, cref, d, b, q, eps) > 0
        if ok_a and ok_b:
            # 2-2 flip: (a,b,q),(b,a,d) -> (a,d,q),(d,b,q)
            tri[t, 0] = a
            tri[t, 1] = d
            tri[t, 2] = q
            nbr[t, 0] = u
            nbr[t, 1] = n_t_b
            nbr[t, 2] = n_u_b
            tri[u, 0] = d
            tri[u, 1] = b
            tri[u, 2] = q
            nbr[u, 0] = n_t_a
            nbr[u, 1] = t
            nbr[u, 2] = n_u_a
            _replace_nbr(nbr, n_u_b, u, t)
            _replace_nbr(nbr, n_t_a, t, u)
            if sp + 2 >= stack.shape[0]:
                grown = np.empty(2 * stack.shape[0], dtype=stack.dtype)
                grown[:sp] = stack[:sp]
                stack = grown
            stack[sp] = t
            stack[sp + 1] = u
            sp += 2
        elif not ok_a and a != p.shape[0] - 2:
            # a may be swallowed if its star is exactly t, u and (a, q, d)
            w = n_t_b
            kw = -1
            for k in range(3):
                if tri[w, k] == d:
                    kw = k
            if kw < 0:
                continue
            ka = -1
            for k in range(3):
                if tri[w, k] == a:
                    ka = k
            n_w_a = nbr[w, ka]
            tri[t, 0] = d
            tri[t, 1] = b
            tri[t, 2] = q
            nbr[t, 0] = n_t_a
            nbr[t, 1] = n_w_a
            nbr[t, 2] = n_u_a
            _replace_nbr(nbr, n_w_a, w, t)
            _replace_nbr(nbr, n_u_a, u, t)
            alive[u] = False
            alive[w] = False
            free[nfree[0]] = u
            free[nfree[0] + 1] = w
            nfree[0] += 2
            status[a] = HIDDEN
            stack[sp] = t
            sp += 1
        elif not ok_b and b != p.shape[0] - 2:
            w = n_t_a
            kw = -1
            for k in range(3):
                if tri[w, k] == d:
                    kw = k
            if kw < 0:
                continue
            kb = -1
            for k in range(3):
                if tri[w, k] == b:
                    kb = k
            n_w_b = nbr[w, kb]
            tri[t, 0] = a
            tri[t, 1] = d
            tri[t, 2] = q
            nbr[t, 0] = n_w_b
            nbr[t, 1] = n_t_b
            nbr[t, 2] = n_u_b
            _replace_nbr(nbr, n_w_b, w, t)
            _replace_nbr(nbr, n_u_b, u, t)
            alive[u] = False
            alive[w] = False
            free[nfree[0]] = u
            free[nfree[0] + 1] = w
            nfree[0] += 2
            status[b] = HIDDEN
            stack[sp] = t
            sp += 1
    return True, stack


@njit(cache=True)
def build_hull(lifted, order, eps):
    """Triangulated hull of the origin (weight -1) and ``lifted[order]``.

    Returns ``(tri, nbr, status, ok)`` where ``tri``/``nbr`` hold the alive
    faces (vertex ``n`` is the origin), ordered counterclockwise in the Klein
    projection, ``nbr[t, k]`` being the face across the edge opposite
    ``tri[t, k]``, and ``status[i]`` is ``HIDDEN`` for
    points strictly inside or on the hull surface without being a vertex.
    ``ok`` is 0 on success, 1 if all points project onto one line, 2 if the
    flip loop did not terminate.
    """
    n = lifted.shape[0]
    p = np.empty((n + 2, 3))
    p[:n] = lifted
    p[n] = 0.0
    origin = n
    status = np.full(n + 1, UNSET, dtype=np.int64)
    cap = 2 * (n + 1) + 16
    tri = np.zeros((cap, 3), dtype=np.int64)
    nbr = np.zeros((cap, 3), dtype=np.int64)
    alive = np.zeros(cap, dtype=np.bool_)
    free = np.zeros(cap, dtype=np.int64)
    nfree = np.zeros(1, dtype=np.int64)
    ntri = np.zeros(1, dtype=np.int64)

    # seed tetrahedron: origin and three points not on a common plane with it
    i1 = order[0]
    i2 = -1
    i3 = -1
    pos3 = -1
    for s in range(1, order.shape[0]):
        j = order[s]
        if i2 < 0:
            # distinct direction from i1 seen from the origin
            cx = p[i1, 1] * p[j, 2] - p[i1, 2] * p[j, 1]
            cy = p[i1, 2] * p[j, 0] - p[i1, 0] * p[j, 2]
            cz = p[i1, 0] * p[j, 1] - p[i1, 1] * p[j, 0]
            nrm = abs(cx) + abs(cy) + abs(cz)
            sc = (abs(p[i1, 0]) + abs(p[i1, 1]) + abs(p[i1, 2])) * (abs(p[j, 0]) + abs(p[j, 1]) + abs(p[j, 2]))
            if nrm > eps * sc:
                i2 = j
            continue
        if _sign(p, origin, i1, i2, j, eps) != 0:
            i3 = j
            pos3 = s
            break
    if i3 < 0:
        return tri[:0], nbr[:0], status, 1
    if _sign(p, origin, i1, i2, i3, eps) < 0:
        i2, i3 = i3, i2
    # now the origin lies beneath face (i1, i2, i3)
    # a point strictly inside the seed: beyond the centroid as seen from the origin
    for k in range(3):
        p[n + 1, k] = (2.0 / 3.0) * (p[i1, k] + p[i2, k] + p[i3, k])
    # faces of the tetrahedron {o, i1, i2, i3}, each seen counterclockwise from outside
    f = np.array([[i1, i2, i3], [origin, i2, i1], [origin, i3, i2], [origin, i1, i3]])
    for t in range(4):
        for k in range(3):
            tri[t, k] = f[t, k]
        alive[t] = True
    ntri[0] = 4
    for t in range(4):
        for k in range(3):
            a = tri[t, (k + 1) % 3]
            b = tri[t, (k + 2) % 3]
            for u in range(4):
                if u == t:
                    continue
                for m in range(3):
                    if tri[u, m] == b and tri[u, (m + 1) % 3] == a:
                        nbr[t, k] = u
    status[origin] = 0
    status[i1] = 0
    status[i2] = 0
    status[i3] = 0

    stack = np.empty(64, dtype=np.int64)
    last = 0
    for s in range(1, order.shape[0]):
        q = order[s]
        if q == i2 or q == i3:
            continue
        # s of pos3 or earlier skipped points are handled in order as well
        if not alive[last]:
            last = 0
            while not alive[last]:
                last += 1
        t = _locate(p, q, tri, nbr, alive, last, eps, ntri[0])
        if t < 0:
            t = -1
            for u in range(ntri[0]):
                if alive[u]:
                    a, b, c = tri[u, 0], tri[u, 1], tri[u, 2]
                    if (_sign(p, n + 1, a, b, q, 0.0) >= 0 and _sign(p, n + 1, b, c, q, 0.0) >= 0
                            and _sign(p, n + 1, c, a, q, 0.0) >= 0):
                        t = u
                        break
            if t < 0:
                status[q] = HIDDEN
                continue
        a, b, c = tri[t, 0], tri[t, 1], tri[t, 2]
        if _sign(p, a, b, c, q, eps) <= 0:
            status[q] = HIDDEN
            continue
        status[q] = 0
        na = nbr[t, 0]
        nb = nbr[t, 1]
        nc = nbr[t, 2]
        t1 = _new_tri(tri, nbr, alive, free, nfree, ntri)
        t2 = _new_tri(tri, nbr, alive, free, nfree, ntri)
        tri[t, 0] = a
        tri[t, 1] = b
        tri[t, 2] = q
        nbr[t, 0] = t1
        nbr[t, 1] = t2
        nbr[t, 2] = nc
        tri[t1, 0] = b
        tri[t1, 1] = c
        tri[t1, 2] = q
        nbr[t1, 0] = t2
        nbr[t1, 1] = t
        nbr[t1, 2] = na
        tri[t2, 0] = c
        tri[t2, 1] = a
        tri[t2, 2] = q
        nbr[t2, 0] = t
        nbr[t2, 1] = t1
        nbr[t2, 2] = nb
        _replace_nbr(nbr, na, t, t1)
        _replace_nbr(nbr, nb, t, t2)
        stack[0] = t
        stack[1] = t1
        stack[2] = t2
        ok, stack = _flip_loop(p, tri, nbr, alive, free, nfree, ntri, stack, 3, q, status, eps)
        if not ok:
            return tri[:0], nbr[:0], status, 2
        last = t if alive[t] else t1

    # compact
    remap = np.full(ntri[0], -1, dtype=np.int64)
    m = 0
    for t in range(ntri[0]):
        if alive[t]:
            remap[t] = m
            m += 1
    out_tri = np.empty((m, 3), dtype=np.int64)
    out_nbr = np.empty((m, 3), dtype=np.int64)
    # report faces counterclockwise in the Klein projection (reverse the
    # outside-view orientation of faces that look towards the origin)
    for t in range(ntri[0]):
        if alive[t]:
            r = remap[t]
            for k in range(3):
                kk = (3 - k) % 3
                out_tri[r, kk] = tri[t, k]
                out_nbr[r, kk] = remap[nbr[t, k]]
    return out_tri, out_nbr, status, 0

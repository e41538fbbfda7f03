"""Compiled kernels turning a weighted Delaunay triangulation into cells.

Cells are returned in CSR form: ``offsets`` into a vertex array, plus one
integer label per polygon edge (edge ``m`` runs from vertex ``m`` to
``m + 1``).  A label is the index of the neighbouring point, or -1 on the
boundary of the clipping domain.
"""
import numpy as np
from numba import njit


@njit(cache=True, inline="always")
def _linner(u, v):
    return u[0] * v[0] + u[1] * v[1] - u[2] * v[2]


@njit(cache=True)
def _to_sheet(v):
    q = v[2] * v[2] - v[0] * v[0] - v[1] * v[1]
    if q <= 0.0:
        return False
    s = np.sqrt(q)
    if v[2] < 0:
        s = -s
    v[0] /= s
    v[1] /= s
    v[2] /= s
    return True


@njit(cache=True)
def neighbour_lists(tri, n):
    """CSR adjacency over the real points ``0..n-1`` (vertex ``n`` is the origin)."""
    deg = np.zeros(n, dtype=np.int64)
    m = tri.shape[0]
    # every edge appears once in each direction; count the a < b copy
    for t in range(m):
        for k in range(3):
            a = tri[t, (k + 1) % 3]
            b = tri[t, (k + 2) % 3]
            if a < n and b < n and a < b:
                deg[a] += 1
                deg[b] += 1
    ptr = np.zeros(n + 1, dtype=np.int64)
    for i in range(n):
        ptr[i + 1] = ptr[i] + deg[i]
    idx = np.empty(ptr[n], dtype=np.int64)
    fill = ptr[:n].copy()
    for t in range(m):
        for k in range(3):
            a = tri[t, (k + 1) % 3]
            b = tri[t, (k + 2) % 3]
            if a < n and b < n and a < b:
                idx[fill[a]] = b
                fill[a] += 1
                idx[fill[b]] = a
                fill[b] += 1
    return ptr, idx


@njit(cache=True)
def clip_cells(lifted, ptr, idx, domain, active):
    """Intersect the domain polygon with each site's neighbour half-planes.

    ``lifted[i] = exp(-phi_i) x_i``; the cell of ``i`` is
    ``{y : <y, lifted[j] - lifted[i]> <= 0}`` for all neighbours ``j``.
    ``domain`` holds the counterclockwise vertices of a convex polygon on
    the sheet.  Sites with ``active[i] == False`` get empty cells.
    """
    n = lifted.shape[0]
    md = domain.shape[0]
    cap = 0
    maxdeg = 0
    for i in range(n):
        d = ptr[i + 1] - ptr[i]
        cap += md + d + 2
        if d > maxdeg:
            maxdeg = d
    width = md + maxdeg + 4
    offsets = np.zeros(n + 1, dtype=np.int64)
    verts = np.empty((cap, 3))
    labels = np.empty(cap, dtype=np.int64)
    cur_v = np.empty((width, 3))
    cur_l = np.empty(width, dtype=np.int64)
    nxt_v = np.empty((width, 3))
    nxt_l = np.empty(width, dtype=np.int64)
    fvals = np.empty(width)
    normal = np.empty(3)
    x = np.empty(3)
    pos = 0
    for i in range(n):
        count = 0
        if active[i]:
            count = md
            for k in range(md):
                for c in range(3):
                    cur_v[k, c] = domain[k, c]
                cur_l[k] = -1
            for e in range(ptr[i], ptr[i + 1]):
                j = idx[e]
                for c in range(3):
                    normal[c] = lifted[j, c] - lifted[i, c]
                inside = 0
                for k in range(count):
                    fvals[k] = _linner(cur_v[k], normal)
                    if fvals[k] <= 0.0:
                        inside += 1
                if inside == count:
                    continue
                out = 0
                for k in range(count):
                    k1 = (k + 1) % count
                    fc = fvals[k]
                    fn = fvals[k1]
                    if fc <= 0.0:
                        for c in range(3):
                            nxt_v[out, c] = cur_v[k, c]
                        nxt_l[out] = cur_l[k]
                        out += 1
                        if fn > 0.0:
                            for c in range(3):
                                x[c] = fn * cur_v[k, c] - fc * cur_v[k1, c]
                            _to_sheet(x)
                            for c in range(3):
                                nxt_v[out, c] = x[c]
                            nxt_l[out] = j
                            out += 1
                    elif fn <= 0.0:
                        for c in range(3):
                            x[c] = fc * cur_v[k1, c] - fn * cur_v[k, c]
                        _to_sheet(x)
                        for c in range(3):
                            nxt_v[out, c] = x[c]
                        nxt_l[out] = cur_l[k]
                        out += 1
                count = out
                for k in range(count):
                    for c in range(3):
                        cur_v[k, c] = nxt_v[k, c]
                    cur_l[k] = nxt_l[k]
                if count < 3:
                    count = 0
                    break
        for k in range(count):
            for c in range(3):
                verts[pos + k, c] = cur_v[k, c]
            labels[pos + k] = cur_l[k]
        pos += count
        offsets[i + 1] = pos
    return offsets, verts[:pos], labels[:pos]


@njit(cache=True)
def star_cells(tri, nbr, duals, timelike, targets, origin):
    """Cells of ``targets`` read off the stars of their triangulation vertices.

    Returns CSR ``(offsets, verts, labels)`` and a boolean ``bounded`` per
    target, false when the star touches a ghost face, a face whose dual is
    not timelike, or the vertex is missing from the triangulation.
    """
    m = tri.shape[0]
    nv = origin + 1
    first = np.full(nv, -1, dtype=np.int64)
    for t in range(m):
        for k in range(3):
            v = tri[t, k]
            if first[v] < 0:
                first[v] = t
    nt = targets.shape[0]
    offsets = np.zeros(nt + 1, dtype=np.int64)
    bounded = np.ones(nt, dtype=np.bool_)
    # first pass: sizes
    for s in range(nt):
        v = targets[s]
        t0 = first[v]
        cnt = 0
        if t0 >= 0:
            t = t0
            while True:
                cnt += 1
                k = 0
                while tri[t, k] != v:
                    k += 1
                t = nbr[t, (k + 1) % 3]
                if t == t0 or cnt > m:
                    break
        offsets[s + 1] = offsets[s] + cnt
    verts = np.empty((offsets[nt], 3))
    labels = np.empty(offsets[nt], dtype=np.int64)
    for s in range(nt):
        v = targets[s]
        t0 = first[v]
        if t0 < 0:
            bounded[s] = False
            continue
        t = t0
        pos = offsets[s]
        while pos < offsets[s + 1]:
            k = 0
            while tri[t, k] != v:
                k += 1
            for c in range(3):
                verts[pos, c] = duals[t, c]
            labels[pos] = tri[t, (k + 2) % 3]
            if tri[t, (k + 1) % 3] == origin or tri[t, (k + 2) % 3] == origin or not timelike[t]:
                bounded[s] = False
            pos += 1
            t = nbr[t, (k + 1) % 3]
    return offsets, verts, labels, bounded


@njit(cache=True)
def within_collar(points, poly, collar):
    """Whether each point is within ``collar`` of the closed polyline ``poly``.

    Segments whose first endpoint is farther than ``collar`` plus the
    segment length are skipped without the exact foot-point test.
    """
    m = poly.shape[0]
    normals = np.empty((m, 3))
    skip = np.empty(m)
    tab = np.empty(m)
    for k in range(m):
        a = poly[k]
        b = poly[(k + 1) % m]
        nx = a[1] * b[2] - a[2] * b[1]
        ny = a[2] * b[0] - a[0] * b[2]
        nz = -(a[0] * b[1] - a[1] * b[0])
        nn = np.sqrt(max(nx * nx + ny * ny - nz * nz, 1e-300))
        normals[k, 0] = nx / nn
        normals[k, 1] = ny / nn
        normals[k, 2] = nz / nn
        t = max(-_linner(a, b), 1.0)
        tab[k] = t
        skip[k] = np.cosh(collar + np.arccosh(t))
    ch = np.cosh(collar)
    sh = np.sinh(collar)
    out = np.zeros(points.shape[0], dtype=np.bool_)
    for i in range(points.shape[0]):
        p = points[i]
        for k in range(m):
            a = poly[k]
            ca = -_linner(p, a)
            if ca > skip[k]:
                continue
            if ca <= ch:
                out[i] = True
                break
            b = poly[(k + 1) % m]
            if -_linner(p, b) <= ch:
                out[i] = True
                break
            s = _linner(p, normals[k])
            if abs(s) > sh:
                continue
            # foot of the perpendicular, checked against the segment ends
            w = np.sqrt(1.0 + s * s)
            f0 = (p[0] - s * normals[k, 0]) / w
            f1 = (p[1] - s * normals[k, 1]) / w
            f2 = (p[2] - s * normals[k, 2]) / w
            fa = -(f0 * a[0] + f1 * a[1] - f2 * a[2])
            fb = -(f0 * b[0] + f1 * b[1] - f2 * b[2])
            lim = tab[k] * (1.0 + 1e-14)
            if fa <= lim and fb <= lim:
                out[i] = True
                break
    return out

"""Hyperbolic plane primitives in the hyperboloid model.

Points of H^2 are stored as float arrays of shape ``(..., 3)`` on the future
sheet ``<p, p> = -1, p[2] > 0`` of Minkowski space with signature (+, +, -).
The Poincare disk appears only at input/output boundaries.

Every function that produces a point renormalizes it onto the sheet.
"""
from __future__ import annotations

import math

import numpy as np

from .errors import (
    GeometryError,
    InvalidPointError,
    NoIntersectionError,
    OutOfDomainError,
    RangeError,
)

SIGNATURE = np.diag([1.0, 1.0, -1.0])
APEX = np.array([0.0, 0.0, 1.0])

SHEET_TOL = 1e-10
ACOSH_CLAMP = 1e-12
MAX_RADIUS = 20.0
_MAX_X3 = math.cosh(MAX_RADIUS)


def lorentz_inner(u, v):
    """Signature (+, +, -) bilinear form, broadcast over leading axes."""
    u = np.asarray(u, dtype=float)
    v = np.asarray(v, dtype=float)
    return u[..., 0] * v[..., 0] + u[..., 1] * v[..., 1] - u[..., 2] * v[..., 2]


def lorentz_norm_sq(u):
    return lorentz_inner(u, u)


def lorentz_cross(u, v):
    """Lorentzian cross product ``J (u x v)``.

    The result ``w`` is Lorentz-orthogonal to ``u`` and ``v`` and satisfies
    ``<w, t> = det[u, v, t]`` for every ``t``.  With this convention
    ``e1 x e2 = (0, 0, -1)``, and a triangle ``(a, b, c)`` on the sheet is
    counterclockwise in the disk exactly when ``<(b-a) x (c-a), a> > 0``.
    """
    w = np.cross(np.asarray(u, dtype=float), np.asarray(v, dtype=float))
    w[..., 2] *= -1.0
    return w


def normalize(p):
    """Project a timelike vector (either cone) onto the future sheet."""
    p = np.asarray(p, dtype=float)
    q = -lorentz_inner(p, p)
    if np.any(~(q > 0)):
        raise InvalidPointError("vector is not timelike and cannot be put on the sheet")
    s = np.sqrt(q)
    s = np.where(p[..., 2] < 0, -s, s)
    return p / s[..., None]


def check_hpoint(p, tol: float = SHEET_TOL):
    """Validate points on the sheet and inside the working radius."""
    p = np.asarray(p, dtype=float)
    if p.shape[-1:] != (3,) or not np.all(np.isfinite(p)):
        raise InvalidPointError("expected finite 3-vectors")
    if np.any(p[..., 2] <= 0):
        raise InvalidPointError("point is not on the future sheet")
    if np.any(np.abs(lorentz_inner(p, p) + 1.0) > tol * np.maximum(1.0, p[..., 2] ** 2)):
        raise InvalidPointError("point is off the hyperboloid")
    if np.any(p[..., 2] > _MAX_X3):
        raise RangeError(f"point farther than {MAX_RADIUS} from the apex")
    return p


def _acosh_arg(x, y):
    arg = -lorentz_inner(x, y)
    if np.any(arg < 1.0 - ACOSH_CLAMP):
        raise InvalidPointError("points are not on the future sheet")
    return np.maximum(arg, 1.0)


def hyperbolic_distance(x, y):
    """Geodesic distance on the sheet.

    Near-coincident pairs use ``2 asinh(|x - y| / 2)`` with the Lorentz norm of
    the difference, which keeps relative accuracy where arcosh loses it.
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    arg = _acosh_arg(x, y)
    diff = x - y
    chord_sq = np.maximum(lorentz_inner(diff, diff), 0.0)
    near = 2.0 * np.arcsinh(0.5 * np.sqrt(chord_sq))
    far = np.arccosh(arg)
    return np.where(arg < 2.0, near, far)


def disk_to_hyperboloid(z):
    z = np.asarray(z, dtype=float)
    r2 = np.sum(z * z, axis=-1)
    if np.any(~(r2 < 1.0)):
        raise OutOfDomainError("disk point on or outside the unit circle")
    denom = 1.0 - r2
    out = np.empty(z.shape[:-1] + (3,))
    out[..., 0] = 2.0 * z[..., 0] / denom
    out[..., 1] = 2.0 * z[..., 1] / denom
    out[..., 2] = (1.0 + r2) / denom
    if np.any(out[..., 2] > _MAX_X3):
        raise RangeError(f"point farther than {MAX_RADIUS} from the apex")
    return normalize(out)


def hyperboloid_to_disk(p):
    p = np.asarray(p, dtype=float)
    return p[..., :2] / (1.0 + p[..., 2])[..., None]


def hyperboloid_to_klein(p):
    p = np.asarray(p, dtype=float)
    return p[..., :2] / p[..., 2][..., None]


def klein_to_hyperboloid(k):
    k = np.asarray(k, dtype=float)
    r2 = np.sum(k * k, axis=-1)
    if np.any(~(r2 < 1.0)):
        raise OutOfDomainError("Klein point on or outside the unit circle")
    out = np.concatenate([k, np.ones(k.shape[:-1] + (1,))], axis=-1)
    return out / np.sqrt(1.0 - r2)[..., None]


def disk_distance(z, w):
    """Distance between Poincare disk points from the cross-ratio form."""
    z = np.asarray(z, dtype=float)
    w = np.asarray(w, dtype=float)
    zc = z[..., 0] + 1j * z[..., 1]
    wc = w[..., 0] + 1j * w[..., 1]
    t = np.abs((zc - wc) / (1.0 - np.conj(zc) * wc))
    return 2.0 * np.arctanh(t)


def polar_point(dist, angle):
    """Point at distance ``dist`` from the apex in direction ``angle``."""
    dist = np.asarray(dist, dtype=float)
    angle = np.asarray(angle, dtype=float)
    sh = np.sinh(dist)
    return np.stack([sh * np.cos(angle), sh * np.sin(angle), np.cosh(dist)], axis=-1)


def geodesic_point(a, b, t):
    """Point at fraction ``t`` of the way from ``a`` to ``b`` along the geodesic."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    t = np.asarray(t, dtype=float)
    d = hyperbolic_distance(a, b)
    d = np.asarray(d)
    small = d < 1e-9
    safe = np.where(small, 1.0, d)
    wa = np.where(small, 1.0 - t, np.sinh((1.0 - t) * safe) / np.sinh(safe))
    wb = np.where(small, t, np.sinh(t * safe) / np.sinh(safe))
    return normalize(wa[..., None] * a + wb[..., None] * b)


def unit_tangent(a, b):
    """Unit tangent at ``a`` of the geodesic heading to ``b``."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    v = b + lorentz_inner(a, b)[..., None] * a
    return v / np.sqrt(np.maximum(lorentz_inner(v, v), 1e-300))[..., None]


def triangle_area(a: float, b: float, c: float, tol: float = 1e-12) -> float:
    """Area of the hyperbolic triangle with side lengths ``a, b, c``.

    Angles come from the half-angle form of the hyperbolic cosine law, which
    stays accurate for thin and for tiny triangles; area is the angle deficit.
    """
    a, b, c = float(a), float(b), float(c)
    if min(a, b, c) <= 0 or not all(map(math.isfinite, (a, b, c))):
        raise GeometryError("side lengths must be positive and finite")
    s = 0.5 * (a + b + c)
    scale = max(a, b, c)
    if min(s - a, s - b, s - c) < -tol * scale:
        raise GeometryError("side lengths violate the triangle inequality")

    def angle(opp, s1, s2):
        num = math.sinh(max(s - s1, 0.0)) * math.sinh(max(s - s2, 0.0))
        den = math.sinh(s) * math.sinh(max(s - opp, 0.0))
        return 2.0 * math.atan2(math.sqrt(num), math.sqrt(den))

    alpha = angle(a, b, c)
    beta = angle(b, c, a)
    gamma = angle(c, a, b)
    if a < 1e-4 and b < 1e-4 and c < 1e-4:
        # the deficit cancels catastrophically; use the Euclidean limit
        return math.sqrt(max(s * (s - a) * (s - b) * (s - c), 0.0))
    return max(math.pi - alpha - beta - gamma, 0.0)


def triangle_areas(lengths) -> np.ndarray:
    """Areas of triangles from side lengths, shape ``(m, 3)``.

    Hyperbolic L'Huilier formula: ``tan(A/4)^2`` is the product of ``tanh``
    of half the semiperimeter and of its three excesses.  Accurate for tiny
    triangles as well.
    """
    l = np.asarray(lengths, dtype=float)
    s = 0.5 * l.sum(axis=-1)
    ex = s[..., None] - l
    if np.any(l <= 0) or np.any(ex < -1e-12 * l.max(axis=-1, keepdims=True)):
        raise GeometryError("side lengths violate the triangle inequality")
    prod = np.tanh(0.5 * s) * np.prod(np.tanh(0.5 * np.maximum(ex, 0.0)), axis=-1)
    return 4.0 * np.arctan(np.sqrt(prod))


def signed_triangle_area(a, b, c):
    """Signed area of geodesic triangles given by their vertices on the sheet.

    Positive for counterclockwise triangles in the disk.  Broadcasts.
    """
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    c = np.asarray(c, dtype=float)
    det = np.einsum("...i,...i->...", a, np.cross(b, c))
    den = 1.0 - lorentz_inner(a, b) - lorentz_inner(b, c) - lorentz_inner(c, a)
    return 2.0 * np.arctan2(det, den)


def saccheri_area(base: float, leg: float) -> float:
    """``base * sinh(leg)``: area swept by the perpendiculars of length ``leg`` along a base geodesic.

    The far side of this region is the equidistant curve, not a geodesic, so
    the quadrilateral with a geodesic summit is slightly smaller.  For a thin
    strip (``base -> 0``) the two agree to first order, which is how the
    Hessian uses it.
    """
    if base < 0 or leg < 0:
        raise GeometryError("lengths must be nonnegative")
    return base * math.sinh(leg)


def circle_circle_intersection(c1, r1: float, c2, r2: float, tol: float = 1e-12):
    """Both intersection points of two geodesic circles.

    Returned as ``(p, q)`` with ``p`` to the left of the directed geodesic
    from ``c1`` to ``c2`` (counterclockwise in the disk) and ``q`` to its right.
    """
    c1 = np.asarray(c1, dtype=float)
    c2 = np.asarray(c2, dtype=float)
    d = float(hyperbolic_distance(c1, c2))
    if not (r1 > 0 and r2 > 0):
        raise NoIntersectionError("radii must be positive")
    if d <= tol or d >= (r1 + r2) * (1 - tol) or d <= abs(r1 - r2) * (1 + tol):
        raise NoIntersectionError("circles are tangent, nested or disjoint")
    g = math.cosh(d)
    ch1, ch2 = math.cosh(r1), math.cosh(r2)
    alpha = (ch1 - g * ch2) / (1.0 - g * g)
    beta = (ch2 - g * ch1) / (1.0 - g * g)
    # p = alpha c1 + beta c2 + t n with <p, c_k> = -cosh r_k and <p, p> = -1
    n = lorentz_cross(c1, c2)
    nn = float(lorentz_inner(n, n))
    base = alpha * c1 + beta * c2
    bb = float(lorentz_inner(base, base))
    t2 = (-1.0 - bb) / nn
    if t2 <= 0:
        raise NoIntersectionError("circles do not intersect")
    t = math.sqrt(t2)
    p = normalize(base + t * n)
    q = normalize(base - t * n)
    # keep the counterclockwise convention: det[c1, c2, p] > 0
    if np.linalg.det(np.array([c1, c2, p])) < 0:
        p, q = q, p
    return p, q


class LorentzIsometry:
    """Orientation- and time-preserving linear isometry of Minkowski space."""

    __slots__ = ("matrix",)

    def __init__(self, matrix, check: bool = True, tol: float = 1e-10):
        m = np.array(matrix, dtype=float)
        if m.shape != (3, 3):
            raise GeometryError("isometry must be a 3x3 matrix")
        if check:
            resid = np.abs(m.T @ SIGNATURE @ m - SIGNATURE).max()
            scale = max(1.0, float(np.abs(m).max()) ** 2)
            if resid > tol * scale:
                raise GeometryError(f"matrix is not a Lorentz isometry (residual {resid:.3e})")
            if m[2, 2] <= 0:
                raise GeometryError("matrix does not preserve the future cone")
        m.setflags(write=False)
        self.matrix = m

    @classmethod
    def identity(cls):
        return cls(np.eye(3), check=False)

    @classmethod
    def rotation(cls, angle: float):
        c, s = math.cos(angle), math.sin(angle)
        return cls(np.array([[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]]), check=False)

    @classmethod
    def boost_x(cls, dist: float):
        c, s = math.cosh(dist), math.sinh(dist)
        return cls(np.array([[c, 0.0, s], [0.0, 1.0, 0.0], [s, 0.0, c]]), check=False)

    @classmethod
    def translation_to(cls, p):
        """Boost taking the apex to ``p`` along the geodesic joining them."""
        p = np.asarray(p, dtype=float)
        r = math.hypot(p[0], p[1])
        if r < 1e-300:
            return cls.identity()
        ang = math.atan2(p[1], p[0])
        rot = cls.rotation(ang)
        return rot @ cls.boost_x(math.asinh(r)) @ rot.inverse()

    @classmethod
    def from_frames(cls, src, dst):
        """Isometry taking frame ``src`` to frame ``dst``.

        A frame is ``(point, unit tangent)``; the third vector is completed by
        the Lorentzian cross product so orientation is preserved.
        """
        def frame(point, tangent):
            point = normalize(point)
            tangent = np.asarray(tangent, dtype=float)
            # Gram-Schmidt in the Lorentz metric, twice for good measure
            for _ in range(2):
                tangent = tangent + lorentz_inner(tangent, point) * point
                tangent = tangent / math.sqrt(lorentz_inner(tangent, tangent))
            return np.column_stack([tangent, lorentz_cross(point, tangent), point])

        f_src = frame(*src)
        f_dst = frame(*dst)
        # columns are Lorentz-orthonormal with Gram matrix diag(1, 1, -1)
        f_src_inv = SIGNATURE @ f_src.T @ SIGNATURE
        return cls(f_dst @ f_src_inv, check=False)

    def apply(self, p):
        p = np.asarray(p, dtype=float)
        return normalize(p @ self.matrix.T)

    def apply_vector(self, v):
        return np.asarray(v, dtype=float) @ self.matrix.T

    def compose(self, other: "LorentzIsometry") -> "LorentzIsometry":
        """``self`` after ``other``."""
        return LorentzIsometry(self.matrix @ other.matrix, check=False)

    def __matmul__(self, other):
        return self.compose(other)

    def inverse(self) -> "LorentzIsometry":
        return LorentzIsometry(SIGNATURE @ self.matrix.T @ SIGNATURE, check=False)

    def reorthonormalized(self) -> "LorentzIsometry":
        """Nearby exact isometry: Lorentz Gram-Schmidt on the columns.

        Repeated products lose the isometry condition at a rate that grows
        with the entries; rebuilding the frame from the image of the apex and
        of the first axis stops the drift from compounding.
        """
        m = self.matrix
        p = normalize(m[:, 2])
        t = m[:, 0]
        for _ in range(2):
            t = t + lorentz_inner(t, p) * p
            t = t / math.sqrt(lorentz_inner(t, t))
        return LorentzIsometry(np.column_stack([t, lorentz_cross(p, t), p]), check=False)

    def residual(self) -> float:
        """Deviation from the isometry condition ``G^T J G = J``."""
        m = self.matrix
        return float(np.abs(m.T @ SIGNATURE @ m - SIGNATURE).max())

    def __repr__(self):
        return f"LorentzIsometry({self.matrix.tolist()!r})"


def apply_isometry(g: LorentzIsometry, p):
    return g.apply(p)

"""Cusp boundary curves, the model domain M_s, its square Delta_s, and the cardioid."""
from dataclasses import dataclass, field
from enum import IntEnum
from functools import lru_cache

import numpy as np

BOUNDARY_TOL = 1e-10
THETA_Z1 = 3 * np.pi / 8  # polar angle of z1 for every s


class Where(IntEnum):
    OUTSIDE = 0
    INSIDE = 1
    BOUNDARY = 2


@dataclass(frozen=True)
class CuspDegree:
    s: float

    def __post_init__(self):
        if not np.isfinite(self.s) or self.s <= 1:
            raise ValueError(f"cusp degree must satisfy s > 1, got {self.s}")


def _degree(s):
    return s.s if isinstance(s, CuspDegree) else CuspDegree(float(s)).s


def _check_u(u):
    u = np.asarray(u, dtype=float)
    if np.any(u < -1) or np.any(u > 0) or np.any(~np.isfinite(u)):
        raise ValueError("arc parameter u must lie in [-1, 0]")
    return u


def _sign(branch):
    if branch == "upper":
        return 1.0
    if branch == "lower":
        return -1.0
    raise ValueError(f"branch must be 'upper' or 'lower', got {branch!r}")


def ell1_point(s, u, branch="upper"):
    """Point (u, +-(-u)^s) of the boundary of Delta_s near the cusp."""
    s = _degree(s)
    u = _check_u(u)
    return np.stack([u, _sign(branch) * (-u) ** s], axis=-1)


@dataclass(frozen=True)
class CuspArcPoint:
    u: np.ndarray
    r: np.ndarray
    theta: np.ndarray
    x: np.ndarray
    y: np.ndarray

    @property
    def xy(self):
        return np.stack([self.x, self.y], axis=-1)


def arc_radius(s, w):
    """Radius of the square-root arc at w = -u >= 0."""
    w = np.asarray(w, dtype=float)
    return np.sqrt(w) * (1 + w ** (2 * (s - 1))) ** 0.25


def arc_angle(s, w):
    """Polar angle of the upper square-root arc at w = -u >= 0."""
    w = np.asarray(w, dtype=float)
    return 0.5 * (np.pi - np.arctan(w ** (s - 1)))


def ellm_point(s, u, branch="upper"):
    """Point of the square-root arc whose complex square is ell1_point(s, u)."""
    s = _degree(s)
    u = _check_u(u)
    w = -u
    r = arc_radius(s, w)
    th = _sign(branch) * arc_angle(s, w)
    return CuspArcPoint(u=u, r=r, theta=th, x=r * np.cos(th), y=r * np.sin(th))


def _arc_velocity(s, w):
    # d/dw of the upper arc point, w = -u
    r = arc_radius(s, w)
    th = arc_angle(s, w)
    q = w ** (2 * (s - 1))
    dr = (1 + q) ** 0.25 / (2 * np.sqrt(w)) * (1 + (s - 1) * q / (1 + q))
    dth = -0.5 * (s - 1) * w ** (s - 2) / (1 + q)
    return (dr + 1j * r * dth) * np.exp(1j * th)


@dataclass(frozen=True)
class ClosingArc:
    center: tuple
    radius: float
    start: float  # angle at the center of z1 (positive)
    end: float  # angle at the center of z2 (= -start)

    def point(self, alpha):
        alpha = np.asarray(alpha, dtype=float)
        cx, cy = self.center
        return np.stack([cx + self.radius * np.cos(alpha), cy + self.radius * np.sin(alpha)], axis=-1)


def closing_arc(s):
    """Circle tangent to both square-root arcs at z1, z2; arc right of z1z2."""
    s = _degree(s)
    z1 = complex(*ellm_point(s, -1.0, "upper").xy)
    normal = 1j * _arc_velocity(s, 1.0)
    if abs(normal.imag) < 1e-12 * abs(normal):
        raise ValueError("degenerate tangent configuration: normals nearly parallel")
    lam = -z1.imag / normal.imag
    cx = (z1 + lam * normal).real
    radius = abs(z1 - cx)
    start = float(np.arctan2(z1.imag, z1.real - cx))
    if cx + radius <= z1.real:
        raise ValueError("closing circle does not reach the right of z1z2")
    return ClosingArc(center=(float(cx), 0.0), radius=float(radius), start=start, end=-start)


@dataclass(frozen=True)
class BoundaryCurve:
    """The Jordan curve bounding M_s: two cusp arcs and the closing arc."""

    degree: CuspDegree
    arc: ClosingArc
    z1: tuple = field(default=None)
    z2: tuple = field(default=None)

    @property
    def s(self):
        return self.degree.s

    def upper(self, u):
        return ellm_point(self.s, u, "upper")

    def lower(self, u):
        return ellm_point(self.s, u, "lower")

    def radial(self, theta):
        """Exit radius of the ray arg z = theta from M_s (0 where the ray misses)."""
        th = np.abs(_wrap(np.asarray(theta, dtype=float)))
        out = np.zeros_like(th)
        cx = self.arc.center[0]
        R = self.arc.radius
        close = th <= THETA_Z1
        out[close] = cx * np.cos(th[close]) + np.sqrt(R * R - (cx * np.sin(th[close])) ** 2)
        mid = (th > THETA_Z1) & (th < np.pi / 2)
        w = np.tan(np.pi - 2 * th[mid]) ** (1.0 / (self.s - 1))
        out[mid] = arc_radius(self.s, w)
        return out

    def max_radius(self):
        return self.arc.center[0] + self.arc.radius

    def polygon(self, n_arc=12000, n_close=2048):
        """Closed counter-clockwise vertex list (no repeated endpoint).

        Cusp arcs are sampled uniformly in tau = sqrt(-u), which gives vertex
        spacing below 1e-4 near the tip for the default n_arc.
        """
        tau = np.linspace(0.0, 1.0, n_arc + 1)
        w = tau ** 2
        lower = self.lower(-w)  # tip -> z2
        alpha = np.linspace(self.arc.end, self.arc.start, n_close + 1)[1:-1]
        mid = self.arc.point(alpha)  # z2 -> z1 through the right
        upper = self.upper(-w[::-1])  # z1 -> tip
        pts = np.concatenate([lower.xy, mid, upper.xy[:-1]])
        return pts

    def classify(self, z, method="radial", tol=BOUNDARY_TOL):
        """Where.INSIDE / OUTSIDE / BOUNDARY for points z (..., 2)."""
        z = np.asarray(z, dtype=float)
        rho = np.hypot(z[..., 0], z[..., 1])
        theta = np.arctan2(z[..., 1], z[..., 0])
        rb = self.radial(theta)
        on = (np.abs(rho - rb) <= tol) | (rho <= tol)
        # the ray from the tip leaves M_s tangentially near |theta| = pi/2
        near_axis = np.abs(np.abs(theta) - np.pi / 2) < np.pi / 8
        if np.any(near_axis):
            on = on | (near_axis & (self._arc_gap(z) <= tol))
        if method == "radial":
            inside = rho < rb
        elif method == "polygon":
            inside = points_in_polygon(z, self.polygon())
        else:
            raise ValueError(f"unknown method {method!r}")
        out = np.where(on, Where.BOUNDARY, np.where(inside, Where.INSIDE, Where.OUTSIDE))
        return out.astype(np.int8)

    def _arc_gap(self, z):
        # distance-like gap to the cusp arcs: compare |z| with the arc point at the same angle
        rho = np.hypot(z[..., 0], z[..., 1])
        th = np.abs(np.arctan2(z[..., 1], z[..., 0]))
        gap = np.full(rho.shape, np.inf)
        m = (th > THETA_Z1) & (th < np.pi / 2)
        if np.any(m):
            w = np.tan(np.pi - 2 * th[m]) ** (1.0 / (self.s - 1))
            gap[m] = np.abs(arc_radius(self.s, w) - rho[m]) * np.sin(np.pi / 2 - th[m] + 1e-300)
        return gap


def _wrap(theta):
    return (theta + np.pi) % (2 * np.pi) - np.pi


@lru_cache(maxsize=64)
def boundary_curve(s):
    s = _degree(s)
    arc = closing_arc(s)
    z1 = tuple(ellm_point(s, -1.0, "upper").xy)
    z2 = tuple(ellm_point(s, -1.0, "lower").xy)
    return BoundaryCurve(CuspDegree(s), arc, z1, z2)


def points_in_polygon(z, poly, chunk=256):
    """Even-odd ray crossing test (horizontal ray to +x)."""
    z = np.asarray(z, dtype=float)
    flat = z.reshape(-1, 2)
    x0, y0 = poly[:, 0], poly[:, 1]
    x1, y1 = np.roll(x0, -1), np.roll(y0, -1)
    out = np.zeros(len(flat), dtype=bool)
    for k in range(0, len(flat), chunk):
        px = flat[k:k + chunk, 0:1]
        py = flat[k:k + chunk, 1:2]
        straddle = (y0 > py) != (y1 > py)
        with np.errstate(divide="ignore", invalid="ignore"):
            xc = x0 + (py - y0) * (x1 - x0) / (y1 - y0)
        out[k:k + chunk] = np.sum(straddle & (xc > px), axis=1) % 2 == 1
    return out.reshape(z.shape[:-1])


def in_Ms(s, z, method="polygon"):
    """Classify z against M_s; scalar input returns a Where member."""
    z = np.asarray(z, dtype=float)
    res = boundary_curve(_degree(s)).classify(z, method=method)
    return Where(int(res)) if res.ndim == 0 else res


def in_Delta_s(s, w, method="polygon"):
    """Classify w against Delta_s by testing both complex square roots."""
    w = np.asarray(w, dtype=float)
    root = np.sqrt(w[..., 0] + 1j * w[..., 1])
    bc = boundary_curve(_degree(s))
    codes = []
    for r in (root, -root):
        codes.append(bc.classify(np.stack([r.real, r.imag], axis=-1), method=method))
    a, b = codes
    on = (a == Where.BOUNDARY) | (b == Where.BOUNDARY)
    inside = (a == Where.INSIDE) | (b == Where.INSIDE)
    res = np.where(on, Where.BOUNDARY, np.where(inside, Where.INSIDE, Where.OUTSIDE)).astype(np.int8)
    return Where(int(res)) if res.ndim == 0 else res


def square(z):
    z = np.asarray(z, dtype=float)
    x, y = z[..., 0], z[..., 1]
    return np.stack([x * x - y * y, 2 * x * y], axis=-1)


# ------------------------------------------------------------------ cardioid

def cardioid_defining(w):
    """(x^2+y^2)^2 - 4x(x^2+y^2) - 4y^2: negative inside the cardioid."""
    w = np.asarray(w, dtype=float)
    x, y = w[..., 0], w[..., 1]
    q = x * x + y * y
    return q * q - 4 * x * q - 4 * y * y


def _d_ratio(x):
    return (4 - x) / (2 - x * x + 2 * x + 2 * np.sqrt(1 + 2 * x))


def cardioid_d(x):
    """Half-width squared of the cardioid's exterior cusp: y^2 = d(x), x <= 0.

    This is the smaller root in y^2 of the defining quartic, rationalised:
    -x^3 (4 - x) / (2 + 2x - x^2 + 2 sqrt(1 + 2x)), so d(x) ~ |x|^3.
    """
    x = np.asarray(x, dtype=float)
    if np.any(1 + 2 * x <= 0):
        raise ValueError("cardioid_d needs 1 + 2x > 0")
    return -x ** 3 * _d_ratio(x)


@dataclass(frozen=True)
class CardioidLocalData:
    j0: int
    c1: float
    c2: float


def cardioid_constants(j0=6, n=20001):
    """Tightest c1 >= d/|x|^3 >= c2 on [-2^-j0, 0], by dense sampling."""
    if int(j0) < 1:
        raise ValueError("j0 must be a positive integer")
    x = np.linspace(-(2.0 ** -int(j0)), 0.0, n)
    ratio = _d_ratio(x)
    return CardioidLocalData(j0=int(j0), c1=float(ratio.max()), c2=float(ratio.min()))


def boundary_rows(s, n=1024, n_arc=None):
    """Rows (branch, u, x, y) sampling both cusp arcs and the closing arc.

    For the closing arc the parameter column holds the angle at the circle center.
    """
    bc = boundary_curve(_degree(s))
    u = np.linspace(-1.0, 0.0, n)
    rows = []
    for branch in ("upper", "lower"):
        p = ellm_point(bc.s, u, branch)
        rows += [(branch, a, b, c) for a, b, c in zip(u, p.x, p.y)]
    m = n if n_arc is None else n_arc
    alpha = np.linspace(bc.arc.start, bc.arc.end, m)
    pts = bc.arc.point(alpha)
    rows += [("arc", a, b, c) for a, (b, c) in zip(alpha, pts)]
    return rows

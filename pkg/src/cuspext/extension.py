"""The plane map E: z^2 on the closed model domain, E1 on the dyadic cells, E2 outside.

E2 is built from three explicit pieces:
  continuation  {rho0 <= |z| <= rho_c} minus M: the t-independent cell formula
                continued up to the end of the cusp arcs (rho_c = eta(u_cap));
  collar        between D' = M u B(0, rho_c) and S(0, R0): a log-polar blend of
                the boundary values towards the far field;
  far field     |z| >= R0: kappa z |z|.
"""
from dataclasses import dataclass
from functools import cached_property
import json
import math

import numpy as np

from . import linalg2 as la
from .geometry import Where, boundary_curve
from .scenario import Scenario

TOL = 1e-10


# ----------------------------------------------------------- model domains

class PowerDomain:
    """M_s bounded by the two square-root arcs and the closing arc."""

    def __init__(self, s):
        self.bc = boundary_curve(s)

    def radial(self, th):
        return self.bc.radial(th)

    def dradial(self, th):
        # only used where the closing arc is the boundary
        c, R = self.bc.arc.center[0], self.bc.arc.radius
        th = np.asarray(th, float)
        sn, cs = np.sin(th), np.cos(th)
        return -c * sn - c * c * sn * cs / np.sqrt(R * R - (c * sn) ** 2)

    def classify(self, z):
        return self.bc.classify(z)

    @property
    def rmax(self):
        return self.bc.max_radius()


class DiskDomain:
    """M = D + 1, the square-root preimage of the cardioid."""

    def radial(self, th):
        return np.maximum(2 * np.cos(th), 0.0)

    def dradial(self, th):
        return -2 * np.sin(th)

    def classify(self, z, tol=TOL):
        z = np.asarray(z, float)
        d = np.hypot(z[..., 0] - 1, z[..., 1]) - 1
        return np.where(np.abs(d) <= tol, Where.BOUNDARY,
                        np.where(d < 0, Where.INSIDE, Where.OUTSIDE)).astype(np.int8)

    rmax = 2.0


def square(z):
    z = np.asarray(z, float)
    x, y = z[..., 0], z[..., 1]
    return np.stack([x * x - y * y, 2 * x * y], -1)


def square_jac(z):
    z = np.asarray(z, float)
    x, y = z[..., 0], z[..., 1]
    return la.mat(2 * x, -2 * y, 2 * y, 2 * x)


def continuation_map(profile, z):
    z = np.asarray(z, float)
    rho = np.hypot(z[..., 0], z[..., 1])
    th = np.mod(np.arctan2(z[..., 1], z[..., 0]), 2 * np.pi)
    U = profile.eta_inverse(rho)
    return np.stack([-U, profile.phi(U) * 2 * (np.pi - th) / profile.ell(U)], -1)


def continuation_jac(profile, z):
    z = np.asarray(z, float)
    rho = np.hypot(z[..., 0], z[..., 1])
    th = np.mod(np.arctan2(z[..., 1], z[..., 0]), 2 * np.pi)
    U = profile.eta_inverse(rho)
    ell = profile.ell(U)
    p = profile.phi(U)
    Ur = 1 / profile.eta_prime(U)
    lr = profile.dell_dr(U)
    w = 2 * (np.pi - th)
    dr = la.mat(-Ur, 0.0, w * (profile.dphi(U) * Ur / ell - p * lr / ell ** 2), -2 * p / ell)
    c, s_ = np.cos(th), np.sin(th)
    return dr @ la.mat(c, s_, -s_ / rho, c / rho)


def _rot(a):
    c, s_ = np.cos(a), np.sin(a)
    return la.mat(c, -s_, s_, c)


# ---------------------------------------------------------------- extension

REGIONS = ("Ms_closure", "Omega1", "continuation", "collar", "far_field")


@dataclass(frozen=True)
class RegionLabel:
    tag: str
    j: int = None
    part: str = None

    def __str__(self):
        return f"Omega1({self.j})" if self.tag == "Omega1" else self.tag


class Extension:
    """Evaluate E and DE for a scenario."""

    def __init__(self, scenario=None, R0=None, kappa=1.0, cells=None):
        self.scenario = scenario or Scenario()
        sc = self.scenario
        self.profile = sc.profile
        self.domain = DiskDomain() if sc.cardioid else PowerDomain(sc.degree)
        self.cells = sc.cells() if cells is None else cells
        self.rho0 = float(self.profile.eta(4.0 ** -self.cells.j_first))
        self.u_cap = self.profile.u_cap
        self.rho_c = float(self.profile.eta(self.u_cap))
        self.R0 = float(R0) if R0 is not None else max(4.0, 2 * self.domain.rmax)
        self.kappa = float(kappa)
        self.lam0 = math.log(self.R0)
        self.B = math.log(self.kappa * self.R0 ** 2)

    def descriptor(self):
        d = dict(self.scenario.descriptor())
        d.update({"R0": self.R0, "kappa": self.kappa, "rho0": self.rho0, "rho_c": self.rho_c})
        if self.scenario.cardioid:
            from .geometry import cardioid_constants
            cc = cardioid_constants(self.scenario.j0)
            d.update({"c1": cc.c1, "c2": cc.c2})
        return d

    def to_json(self):
        return json.dumps(self.descriptor(), sort_keys=True)

    # ------------------------------------------------------------ regions
    def region_codes(self, z):
        """Integer codes 0..4 into REGIONS, plus a boundary flag."""
        z = np.asarray(z, float)
        rho = np.hypot(z[..., 0], z[..., 1])
        where = self.domain.classify(z)
        code = np.full(rho.shape, 3, dtype=np.int8)
        code[rho <= self.rho_c] = 2
        code[rho <= self.rho0 * (1 + 1e-12)] = 1
        code[where != Where.OUTSIDE] = 0
        code[(rho >= self.R0) & (where == Where.OUTSIDE)] = 4
        return code, where == Where.BOUNDARY

    def classify_region(self, z):
        z = np.asarray(z, float)
        code, on = self.region_codes(z)
        code, on = int(code), bool(on)
        if on:
            return RegionLabel("boundary")
        if code == 0:
            return RegionLabel("Ms_closure")
        if code == 1:
            rho = math.hypot(z[0], z[1])
            return RegionLabel("Omega1", j=max(int(self.cells.index(rho)), self.cells.j_first))
        return RegionLabel("Omega2", part=REGIONS[code])

    # -------------------------------------------------------------- collar
    def _inner(self, th):
        """Inner collar boundary: log radius, its derivative, target log|h|, arg h."""
        th = np.asarray(th, float)
        rM = self.domain.radial(th)
        close = rM >= self.rho_c
        lb = np.log(np.where(close, rM, self.rho_c))
        with np.errstate(invalid="ignore", divide="ignore"):
            dlb = np.where(close, self.domain.dradial(th) / np.where(close, rM, 1.0), 0.0)
        # circle part: continuation values at U = u_cap, theta measured in (-pi, pi]
        Uc = self.u_cap
        pc = float(self.profile.phi(Uc))
        lc = float(self.profile.ell(Uc))
        thp = np.mod(th, 2 * np.pi)
        Wy = 2 * pc * (np.pi - thp) / lc
        r2 = Uc * Uc + Wy * Wy
        A = np.where(close, 2 * lb, 0.5 * np.log(r2))
        dA = np.where(close, 2 * dlb, Wy * (-2 * pc / lc) / r2)
        Phi = np.where(close, 2 * th, np.arctan2(Wy, -Uc))
        dPhi = np.where(close, 2.0, 2 * Uc * pc / (lc * r2))
        return lb, dlb, A, dA, Phi, dPhi

    @cached_property
    def _split(self):
        th = np.linspace(-np.pi, np.pi, 4097)
        lb, _, A, _, _, _ = self._inner(th)
        lm = 0.5 * (float(np.max(lb)) + self.lam0)
        return lm, 0.5 * (float(np.max(A)) + self.B)

    @property
    def lam_mid(self):
        """Log radius of the circle separating the two collar layers."""
        return self._split[0]

    @property
    def B_mid(self):
        """Log modulus the inner layer reaches on that circle."""
        return self._split[1]

    def _collar(self, z, jac=False):
        # inner layer lb..lam_mid: radial blend to |w| = e^B_mid at frozen angle Phi(theta);
        # outer layer lam_mid..lam0: annulus B_mid..B, angle relaxing from Phi to theta
        # with a smoothstep so the angle has no radial kink at either end.
        # det > 0 holds identically in both layers.
        z = np.asarray(z, float)
        lam = np.log(np.hypot(z[..., 0], z[..., 1]))
        th = np.arctan2(z[..., 1], z[..., 0])
        lb, dlb, A, dA, Phi, dPhi = self._inner(th)
        lm, Bm = self._split
        inner = lam <= lm
        w1 = lm - lb
        s1 = np.clip((lam - lb) / w1, 0.0, 1.0)
        w2 = self.lam0 - lm
        s2 = np.clip((lam - lm) / w2, 0.0, 1.0)
        g = s2 * s2 * (3 - 2 * s2)
        Lam = np.where(inner, (1 - s1) * A + s1 * Bm, Bm + s2 * (self.B - Bm))
        psi = np.where(inner, Phi, Phi + g * (th - Phi))
        val = np.exp(Lam)[..., None] * np.stack([np.cos(psi), np.sin(psi)], -1)
        if not jac:
            return val
        s1_t = -dlb * (1 - s1) / w1
        dg = 6 * s2 * (1 - s2) / w2
        M1 = la.mat((Bm - A) / w1, (1 - s1) * dA + (Bm - A) * s1_t, 0.0, dPhi)
        M2 = la.mat((self.B - Bm) / w2, 0.0, (th - Phi) * dg, (1 - g) * dPhi + g)
        Ml = np.where(inner[..., None, None], M1, M2)
        scale = np.exp(Lam - lam)[..., None, None]
        return val, scale * (_rot(psi) @ Ml @ _rot(-th))

    def _far(self, z, jac=False):
        z = np.asarray(z, float)
        r = np.hypot(z[..., 0], z[..., 1])
        val = self.kappa * z * r[..., None]
        if not jac:
            return val
        x, y = z[..., 0], z[..., 1]
        D = self.kappa * la.mat(r + x * x / r, x * y / r, x * y / r, r + y * y / r)
        return val, D

    # ---------------------------------------------------------- evaluation
    def _apply(self, z, jac):
        z = np.asarray(z, float)
        flat = z.reshape(-1, 2)
        code, _ = self.region_codes(flat)
        val = np.empty_like(flat)
        D = np.empty((len(flat), 2, 2)) if jac else None
        for c in range(5):
            m = code == c
            if not np.any(m):
                continue
            p = flat[m]
            if c == 0:
                val[m] = square(p)
                if jac:
                    D[m] = square_jac(p)
            elif c == 1:
                val[m] = self.cells.E1(p)
                if jac:
                    D[m] = self.cells.DE1(p)
            elif c == 2:
                val[m] = continuation_map(self.profile, p)
                if jac:
                    D[m] = continuation_jac(self.profile, p)
            elif c == 3:
                if jac:
                    val[m], D[m] = self._collar(p, True)
                else:
                    val[m] = self._collar(p)
            else:
                if jac:
                    val[m], D[m] = self._far(p, True)
                else:
                    val[m] = self._far(p)
        val = val.reshape(z.shape)
        if jac:
            return val, D.reshape(z.shape + (2,))
        return val

    def __call__(self, z):
        return self._apply(z, False)

    def jac(self, z):
        return self._apply(z, True)[1]

    def E2(self, z):
        z = np.asarray(z, float)
        code, on = self.region_codes(z)
        if np.any(code < 2):
            raise ValueError("point outside Omega_2")
        return self._apply(z, False)

    # ------------------------------------------------------- diagnostics
    def collar_grid(self, n_lam=64, n_th=512):
        """Points of the collar on a log-polar grid (for distortion sampling)."""
        th = np.linspace(-np.pi, np.pi, n_th, endpoint=False) + np.pi / n_th
        lb = self._inner(th)[0]
        s_ = (np.arange(n_lam) + 0.5) / n_lam
        lam = lb[None, :] + s_[:, None] * (self.lam0 - lb[None, :])
        r = np.exp(lam)
        return np.stack([r * np.cos(th), r * np.sin(th)], -1)

    def max_E2_distortion(self, n_lam=64, n_th=512):
        pts = self.collar_grid(n_lam, n_th).reshape(-1, 2)
        _, D = self._collar(pts, True)
        cont = self.continuation_grid()
        Dc = continuation_jac(self.profile, cont)
        Ks = np.concatenate([la.distortion(D), la.distortion(Dc).ravel()])
        return float(np.max(Ks)), float(np.min(la.det(D)))

    def continuation_grid(self, n=64):
        U = np.geomspace(4.0 ** -self.cells.j_first, self.u_cap, n)
        rho = self.profile.eta(U)
        f = (np.arange(n) + 0.5) / n - 0.5
        half = self.profile.ell(U) / 2
        th = np.pi + f[:, None] * 2 * half[None, :]
        return np.stack([rho[None, :] * np.cos(th), rho[None, :] * np.sin(th)], -1)


def E_eval(z, s=1.5, j0=6, construction="simple", squeeze=None):
    from .squeeze import SqueezeParams
    sc = Scenario(s=s, j0=j0, construction=construction, squeeze=squeeze or SqueezeParams())
    return Extension(sc)(z)


def squeezed_E(z, s=1.5, j0=6, params=None):
    return E_eval(z, s, j0, "squeezed", params)


def E2_eval(z, s=1.5, j0=6):
    return Extension(Scenario(s=s, j0=j0)).E2(z)


# ---------------------------------------------------------------- cardioid

class CardioidMap:
    """f0(z) = E(z + 1) for the cardioid scenario; equals (z + 1)^2 on the unit disk."""

    def __init__(self, j0=6, construction="simple", squeeze=None):
        from .squeeze import SqueezeParams
        sc = Scenario(s=1.5, j0=j0, construction=construction,
                      squeeze=squeeze or SqueezeParams(), cardioid=True)
        self.ext = Extension(sc)

    def __call__(self, z):
        z = np.asarray(z, float)
        return self.ext(z + np.array([1.0, 0.0]))

    def jac(self, z):
        z = np.asarray(z, float)
        return self.ext.jac(z + np.array([1.0, 0.0]))


def cardioid_f0(z, j0=6):
    return CardioidMap(j0)(z)


# ------------------------------------------------------------ grid checks

def grid_injectivity(fn, lo, hi, n=256):
    """Check that fn, sampled on an n x n grid, is an orientation-preserving embedding.

    Every grid triangle must keep positive orientation and the image of the
    grid's outer boundary must be a simple closed curve; together these imply
    the piecewise-linear interpolant is injective (no quad overlaps).
    """
    xs = np.linspace(lo[0], hi[0], n)
    ys = np.linspace(lo[1], hi[1], n)
    X, Y = np.meshgrid(xs, ys, indexing="ij")
    P = fn(np.stack([X, Y], -1))
    a = P[:-1, :-1]
    b = P[1:, :-1]
    c = P[1:, 1:]
    d = P[:-1, 1:]
    o1 = _orient(a, b, c)
    o2 = _orient(a, c, d)
    flips = int(np.sum(o1 <= 0) + np.sum(o2 <= 0))
    ring = np.concatenate([P[:, 0], P[-1, 1:], P[-2::-1, -1], P[0, -2:0:-1]])
    crossings = polyline_self_intersections(ring)
    return {"flips": flips, "boundary_crossings": crossings,
            "min_orientation": float(min(o1.min(), o2.min())), "ok": flips == 0 and crossings == 0}


def _orient(a, b, c):
    return (b[..., 0] - a[..., 0]) * (c[..., 1] - a[..., 1]) - (b[..., 1] - a[..., 1]) * (c[..., 0] - a[..., 0])


def polyline_self_intersections(ring, closed=True):
    """Count proper crossings between non-adjacent segments (uniform-grid bucketing)."""
    P = np.asarray(ring, float)
    Q = np.roll(P, -1, axis=0) if closed else P[1:]
    P = P if closed else P[:-1]
    m = len(P)
    lo = np.minimum(P, Q)
    hi = np.maximum(P, Q)
    span = hi.max(0) - lo.min(0)
    nb = max(1, int(math.sqrt(m)))
    cell = span / nb + 1e-300
    origin = lo.min(0)
    i0 = np.floor((lo - origin) / cell).astype(int)
    i1 = np.floor((hi - origin) / cell).astype(int)
    buckets = {}
    for k in range(m):
        for ix in range(i0[k, 0], i1[k, 0] + 1):
            for iy in range(i0[k, 1], i1[k, 1] + 1):
                buckets.setdefault((ix, iy), []).append(k)
    seen = set()
    count = 0
    for segs in buckets.values():
        for u in range(len(segs)):
            for v in range(u + 1, len(segs)):
                i, j = segs[u], segs[v]
                if abs(i - j) <= 1 or (closed and abs(i - j) == m - 1):
                    continue
                key = (min(i, j), max(i, j))
                if key in seen:
                    continue
                seen.add(key)
                if _segments_cross(P[i], Q[i], P[j], Q[j]):
                    count += 1
    return count


def _segments_cross(p1, p2, p3, p4):
    d1 = _orient(p3, p4, p1)
    d2 = _orient(p3, p4, p2)
    d3 = _orient(p1, p2, p3)
    d4 = _orient(p1, p2, p4)
    return (d1 * d2 < 0) and (d3 * d4 < 0)

"""Dyadic cusp cells and the cell maps F_t = f3^-1 . f4^-1 . f2 . f1^-1.

Coordinates on the source side:
  z       Cartesian point of Q_t (annular sector outside M_s)
  (r, th) polar, th in [0, 2 pi)
  (x, y)  R_t = [L1, L2] x [-sigma/2, sigma/2]
Target side:
  (U, V)  R~_t = [(t/2)^2, t^2] x [-H, H],  H = phi(t^2)
  w       Q~_t = {-t^2 <= u <= -(t/2)^2, |v| <= phi(-u)}

The middle map f4^-1 : R_t -> R~_t is pluggable so the squeezed variant can
reuse everything else.
"""
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from . import linalg2 as la
from .profiles import PowerProfile, Profile

INTERFACE_TOL = 1e-12


def as_profile(s):
    if isinstance(s, Profile):
        return s
    return _power(float(s))


@lru_cache(maxsize=32)
def _power(s):
    return PowerProfile(s)


# ------------------------------------------------------------- eta & ell

def eta(s, x):
    x = np.asarray(x, dtype=float)
    if np.any(x < 0):
        raise ValueError("eta needs x >= 0")
    return as_profile(s).eta(x)


def eta_prime(s, x):
    return as_profile(s).eta_prime(x)


def eta_inverse(s, r):
    return as_profile(s).eta_inverse(r)


@dataclass(frozen=True)
class CellScale:
    t: float
    L1: float
    L2: float
    sigma: float
    H: float  # half-height phi(t^2) of the target rectangle
    profile: Profile

    @property
    def u_lo(self):
        return (self.t / 2) ** 2

    @property
    def u_hi(self):
        return self.t ** 2

    @property
    def alpha(self):
        return self.u_hi - self.u_lo

    @property
    def beta(self):
        return 2 * self.H

    @property
    def gamma(self):
        return self.sigma


def cell(t, s=1.5, t_max=0.125):
    """Cell geometry at scale t (0 < t <= t_max)."""
    t = float(t)
    if not (0 < t <= t_max):
        raise ValueError(f"scale t must lie in (0, {t_max}], got {t}")
    prof = as_profile(s)
    if t * t > prof.u_cap:
        raise ValueError("scale exceeds the profile's local range")
    L1 = float(prof.eta((t / 2) ** 2))
    L2 = float(prof.eta(t * t))
    return CellScale(t=t, L1=L1, L2=L2, sigma=L2 - L1, H=float(prof.phi(t * t)), profile=prof)


def ell_of_r(cs, r, tol=1e-12):
    """(ell(r), d ell/dr) on [L1, L2]."""
    r = np.asarray(r, dtype=float)
    if np.any(r < cs.L1 * (1 - tol)) or np.any(r > cs.L2 * (1 + tol)):
        raise ValueError("radius outside [L1, L2]")
    U = cs.profile.eta_inverse(r)
    return cs.profile.ell(U), cs.profile.dell_dr(U)


# ------------------------------------------------------------------ pieces

def f1(x, y):
    x = np.asarray(x, dtype=float)
    return x * np.cos(y), x * np.sin(y)


def Df1(x, y):
    c, s_ = np.cos(y), np.sin(y)
    return la.mat(c, -x * s_, s_, x * c)


def f1_inv(zx, zy):
    zx = np.asarray(zx, dtype=float)
    zy = np.asarray(zy, dtype=float)
    r = np.hypot(zx, zy)
    if np.any(r == 0):
        raise ValueError("f1_inv undefined at the origin")
    th = np.mod(np.arctan2(zy, zx), 2 * np.pi)
    return r, th


def Df1_inv(zx, zy):
    r2 = zx * zx + zy * zy
    r = np.sqrt(r2)
    return la.mat(zx / r, zy / r, -zy / r2, zx / r2)


def f2(cs, r, th):
    ell, _ = ell_of_r(cs, r)
    if np.any(np.abs(np.pi - th) > ell / 2 * (1 + 1e-12) + 1e-15):
        raise ValueError("point outside the angular strip of Q_t")
    return np.asarray(r, dtype=float), cs.sigma / ell * (np.pi - th)


def Df2(cs, r, th):
    ell, dell = ell_of_r(cs, r)
    return la.mat(1.0, 0.0, -cs.sigma * (np.pi - th) * dell / ell ** 2, -cs.sigma / ell)


def f2_inv(cs, x, y):
    ell, _ = ell_of_r(cs, x)
    return np.asarray(x, dtype=float), np.pi - np.asarray(y) * ell / cs.sigma


def Df2_inv(cs, x, y):
    ell, dell = ell_of_r(cs, x)
    return la.mat(1.0, 0.0, -y * dell / cs.sigma, -ell / cs.sigma)


def f3(cs, u, v):
    u = np.asarray(u, dtype=float)
    if np.any(u >= 0):
        raise ValueError("f3 needs u < 0")
    return -u, cs.H * np.asarray(v) / cs.profile.phi(-u)


def Df3(cs, u, v):
    U = -np.asarray(u, dtype=float)
    p = cs.profile.phi(U)
    return la.mat(-1.0, 0.0, cs.H * v * cs.profile.dphi(U) / p ** 2, cs.H / p)


def f3_inv(cs, U, V):
    U = np.asarray(U, dtype=float)
    return -U, np.asarray(V) * cs.profile.phi(U) / cs.H


def Df3_inv(cs, U, V):
    return la.mat(-1.0, 0.0, V * cs.profile.dphi(U) / cs.H, cs.profile.phi(U) / cs.H)


def f4_simple(cs, u, v):
    return cs.profile.eta(u), cs.sigma / (2 * cs.H) * np.asarray(v)


def Df4_simple(cs, u, v):
    return la.mat(cs.profile.eta_prime(u), 0.0, 0.0, cs.sigma / (2 * cs.H) + 0 * np.asarray(v))


def f4_simple_inv(cs, x, y):
    return cs.profile.eta_inverse(x), 2 * cs.H / cs.sigma * np.asarray(y)


def Df4_simple_inv(cs, x, y):
    U = cs.profile.eta_inverse(x)
    return la.mat(1 / cs.profile.eta_prime(U), 0.0, 0.0, 2 * cs.H / cs.sigma + 0 * np.asarray(y))


def polar_rect(cs, x, y):
    """f1 . f2^-1: R_t -> Q_t, with its Jacobian (det = -x ell / sigma)."""
    ell, dell = ell_of_r(cs, x)
    a = np.asarray(y) * ell / cs.sigma
    zx, zy = -x * np.cos(a), x * np.sin(a)
    c = x * y * dell / cs.sigma
    m = x * ell / cs.sigma
    ca, sa = np.cos(a), np.sin(a)
    D = la.mat(-ca + c * sa, m * sa, sa + c * ca, m * ca)
    return zx, zy, D


class SimpleMiddle:
    """The plain f4^-1 = (eta^-1(x), 2 H y / sigma)."""

    name = "simple"

    def __init__(self, cs):
        self.cs = cs

    def __call__(self, x, y):
        return f4_simple_inv(self.cs, x, y)

    def jac(self, x, y):
        return Df4_simple_inv(self.cs, x, y)

    def inverse(self, U, V):
        return f4_simple(self.cs, U, V)

    def inverse_jac(self, U, V):
        return Df4_simple(self.cs, U, V)


class CellMap:
    """F_t on one dyadic cell, for a given middle map."""

    def __init__(self, cs, middle=None):
        self.cs = cs
        self.middle = SimpleMiddle(cs) if middle is None else middle

    # source side helpers
    def to_rect(self, z):
        z = np.asarray(z, dtype=float)
        r, th = f1_inv(z[..., 0], z[..., 1])
        return f2(self.cs, r, th)

    def from_rect(self, x, y):
        zx, zy, _ = polar_rect(self.cs, x, y)
        return np.stack([zx, zy], -1)

    def contains(self, z, tol=INTERFACE_TOL):
        z = np.asarray(z, dtype=float)
        r = np.hypot(z[..., 0], z[..., 1])
        th = np.mod(np.arctan2(z[..., 1], z[..., 0]), 2 * np.pi)
        ok = (r >= self.cs.L1 * (1 - tol)) & (r <= self.cs.L2 * (1 + tol))
        rc = np.clip(r, self.cs.L1, self.cs.L2)
        U = self.cs.profile.eta_inverse(rc)
        half = self.cs.profile.ell(U) / 2
        return ok & (np.abs(np.pi - th) <= half + tol)

    def F(self, z):
        x, y = self.to_rect(z)
        U, V = self.middle(x, y)
        u, v = f3_inv(self.cs, U, V)
        return np.stack([u, v], -1)

    def DF(self, z):
        """Chain rule Df3^-1 . Df4^-1 . Df2 . Df1^-1."""
        z = np.asarray(z, dtype=float)
        r, th = f1_inv(z[..., 0], z[..., 1])
        x, y = f2(self.cs, r, th)
        U, V = self.middle(x, y)
        return (Df3_inv(self.cs, U, V) @ self.middle.jac(x, y)
                @ Df2(self.cs, r, th) @ Df1_inv(z[..., 0], z[..., 1]))

    def DF_rect(self, x, y):
        """DF at the point of Q_t with rectangle coordinates (x, y)."""
        _, _, Dh = polar_rect(self.cs, x, y)
        U, V = self.middle(x, y)
        return Df3_inv(self.cs, U, V) @ self.middle.jac(x, y) @ la.inv(Dh)

    def F_inv(self, w):
        w = np.asarray(w, dtype=float)
        U, V = f3(self.cs, w[..., 0], w[..., 1])
        x, y = self.middle.inverse(U, V)
        return self.from_rect(x, y)

    def DF_inv(self, w):
        w = np.asarray(w, dtype=float)
        U, V = f3(self.cs, w[..., 0], w[..., 1])
        x, y = self.middle.inverse(U, V)
        _, _, Dh = polar_rect(self.cs, x, y)
        return Dh @ self.middle.inverse_jac(U, V) @ Df3(self.cs, w[..., 0], w[..., 1])


def F_t(z, t, s=1.5):
    return CellMap(cell(t, s)).F(z)


def F_t_inv(w, t, s=1.5):
    return CellMap(cell(t, s)).F_inv(w)


def simple_composite(profile, z):
    """t-independent closed form of the simple F on any cell."""
    z = np.asarray(z, dtype=float)
    rho, th = f1_inv(z[..., 0], z[..., 1])
    U = profile.eta_inverse(rho)
    return np.stack([-U, profile.phi(U) * 2 * (np.pi - th) / profile.ell(U)], -1)


# ------------------------------------------------------------- dyadic E1

class DyadicCells:
    """Omega_1 = union of Q_{2^-j}, j >= j_first, with a cell-map factory."""

    def __init__(self, profile, j_first, middle_factory=None, j_cap=60):
        self.profile = profile
        self.j_first = int(j_first)
        self.middle_factory = middle_factory
        self.j_cap = j_cap
        self._cache = {}

    def cell_map(self, j):
        j = int(j)
        if j not in self._cache:
            cs = cell(2.0 ** -j, self.profile, t_max=0.5)
            mid = None if self.middle_factory is None else self.middle_factory(cs, j)
            self._cache[j] = CellMap(cs, mid)
        return self._cache[j]

    def radius_range(self):
        return 0.0, float(self.profile.eta(4.0 ** -self.j_first))

    def index(self, rho):
        """Cell index for radius rho; interface points go to the lower j."""
        rho = np.asarray(rho, dtype=float)
        U = self.profile.eta_inverse(rho)
        with np.errstate(divide="ignore"):
            lv = -np.log(U) / np.log(4.0)
        j = np.ceil(lv - INTERFACE_TOL) - 1
        # exact interface check in radius (log rounding can misplace by one)
        j = np.where(np.isfinite(j), j, self.j_cap)
        return j.astype(int)

    def contains(self, z, tol=INTERFACE_TOL):
        z = np.asarray(z, dtype=float)
        rho = np.hypot(z[..., 0], z[..., 1])
        th = np.mod(np.arctan2(z[..., 1], z[..., 0]), 2 * np.pi)
        lo, hi = self.radius_range()
        ok = (rho > 0) & (rho <= hi * (1 + tol))
        U = self.profile.eta_inverse(np.minimum(rho, hi))
        return ok & (np.abs(np.pi - th) <= self.profile.ell(U) / 2 + tol)

    def _dispatch(self, z, fn):
        z = np.asarray(z, dtype=float)
        if not np.all(self.contains(z)):
            raise ValueError("point outside Omega_1")
        flat = z.reshape(-1, 2)
        rho = np.hypot(flat[:, 0], flat[:, 1])
        js = np.maximum(self.index(rho), self.j_first)
        out = None
        for j in np.unique(js):
            m = js == j
            val = fn(self.cell_map(j), flat[m])
            if out is None:
                out = np.empty((len(flat),) + val.shape[1:])
            out[m] = val
        return out.reshape(z.shape[:-1] + out.shape[1:])

    def E1(self, z):
        return self._dispatch(z, lambda cm, p: cm.F(p))

    def DE1(self, z):
        return self._dispatch(z, lambda cm, p: cm.DF(p))


def E1_eval(z, s=1.5, j0=6):
    return DyadicCells(as_profile(s), j0).E1(z)

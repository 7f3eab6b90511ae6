"""Squeezed middle map: R_t split into a centre square T0 and four thin trapezoids.

Each trapezoid T_k (k = 1 top, 2 right, 3 bottom, 4 left) has width gamma*delta.
In exp mode delta = exp(-1/t) underflows for every practical t, so all
trapezoid quantities are written in a local chart (xi, zeta) in [0, 1]^2:

  T1:  y = gamma/2 - gamma*delta*zeta,   x = Pc1 + y (2 xi - 1)
  T2:  X = gamma/2 - gamma*delta*zeta,   x = Pc1 + X, y = X (2 xi - 1)

The map values depend on (xi, zeta) only; the Jacobian is S / delta with S
finite, so every integral is evaluated with log(delta) carried separately.
"""
from dataclasses import dataclass
import math

import numpy as np

from . import linalg2 as la

TINY = np.finfo(float).tiny


@dataclass(frozen=True)
class SqueezeParams:
    mode: str = "exp"
    p: float = 2.0

    def __post_init__(self):
        if self.mode not in ("exp", "power_log"):
            raise ValueError(f"unknown squeeze mode {self.mode!r}")
        if self.mode == "power_log" and not (self.p > 1):
            raise ValueError("power_log mode needs p > 1")

    def descriptor(self):
        d = {"mode": self.mode}
        if self.mode == "power_log":
            d["p"] = self.p
        return d


def log_delta(t, params):
    t = float(t)
    if not (0 < t <= 0.125):
        raise ValueError("scale t must lie in (0, 1/8]")
    if params.mode == "exp":
        return -1.0 / t
    p = params.p
    return (p + 2) / (p - 1) * math.log(t) + p / (p - 1) * math.log(math.log(1 / t))


def delta(t, params):
    """delta_t, clamped at the smallest normal float when it underflows."""
    ld = log_delta(t, params)
    d = math.exp(ld) if ld > math.log(TINY) else TINY
    if not d < 0.5:
        raise ValueError("delta_t must be below 1/2")
    return d


@dataclass(frozen=True)
class TrapezoidDecomposition:
    cs: object
    delta: float
    log_delta: float

    @property
    def gamma(self):
        return self.cs.sigma

    @property
    def alpha(self):
        return self.cs.alpha

    @property
    def beta(self):
        return self.cs.beta

    @property
    def Pc1(self):
        return 0.5 * (self.cs.L1 + self.cs.L2)

    @property
    def Ptc1(self):
        return 0.5 * (self.cs.u_lo + self.cs.u_hi)

    @property
    def X0(self):
        return self.gamma * (0.5 - self.delta)

    @property
    def underflow(self):
        return self.log_delta < math.log(TINY)

    def areas(self):
        g, d = self.gamma, self.delta
        tk = d * g * g * (1 - d)
        return {"T0": (g * (1 - 2 * d)) ** 2, "T1": tk, "T2": tk, "T3": tk, "T4": tk}

    def target_areas(self):
        a, b = self.alpha, self.beta
        top = (a + b / 2) / 2 * (b / 4)
        side = (b + b / 2) / 2 * ((2 * a - b) / 4)
        return {"T0": (b / 2) ** 2, "T1": top, "T2": side, "T3": top, "T4": side}

    def chart_constants(self):
        """Coefficients of B2 = y (a X + b) / (c X + d), X = x - Pc1."""
        a = self.beta / (4 * self.delta * self.gamma)
        return {"a": a, "b": self.beta / 2 - a * self.gamma / 2, "c": 1.0, "d": 0.0}


def decompose(cs, params_or_delta):
    if isinstance(params_or_delta, SqueezeParams):
        ld = log_delta(cs.t, params_or_delta)
        d = delta(cs.t, params_or_delta)
    else:
        d = float(params_or_delta)
        if not (0 < d < 0.5):
            raise ValueError("degenerate delta")
        ld = math.log(d)
    if cs.alpha < cs.beta / 2:
        raise ValueError("target rectangle too short for the centre square")
    return TrapezoidDecomposition(cs, d, ld)


# -------------------------------------------------------------- chart maps

def _top_values(dc, xi, zeta):
    cs = dc.cs
    a, b, g = dc.alpha, dc.beta, dc.gamma
    u = cs.L1 + g * xi
    ei = cs.profile.eta_inverse(np.clip(u, cs.L1, cs.L2))
    lt = a - (a - b / 2) * zeta
    xp = (2 * a - b) * zeta / 4 + cs.u_lo
    A1 = lt / a * (ei - cs.u_lo) + xp
    A2 = b / 2 - b * zeta / 4
    A1xi = lt / a * g / cs.profile.eta_prime(ei)
    A1zeta = -(a - b / 2) / a * (ei - cs.u_lo) + (2 * a - b) / 4
    return A1, A2, A1xi, A1zeta


def mapA_local(dc, xi, zeta):
    """A on T1 in chart coordinates: values, scaled Jacobian S = delta * DA, log det DA."""
    xi, zeta = np.broadcast_arrays(np.asarray(xi, float), np.asarray(zeta, float))
    b, g, d = dc.beta, dc.gamma, dc.delta
    A1, A2, A1xi, A1zeta = _top_values(dc, xi, zeta)
    y = g / 2 - g * d * zeta
    S = la.mat(d * A1xi / (2 * y), -A1zeta / g - d * A1xi * (2 * xi - 1) / (2 * y),
               0.0, b / (4 * g) + 0 * xi)
    logdet = np.log(A1xi * b / (8 * y * g)) - dc.log_delta
    return A1, A2, S, logdet


def mapB_local(dc, xi, zeta):
    """B on T2 in chart coordinates."""
    xi, zeta = np.broadcast_arrays(np.asarray(xi, float), np.asarray(zeta, float))
    a, b, g, d = dc.alpha, dc.beta, dc.gamma, dc.delta
    B1 = dc.cs.u_hi - (2 * a - b) * zeta / 4
    B2 = (2 * xi - 1) * b * (2 - zeta) / 4
    X = g / 2 - g * d * zeta
    B2xi = b * (2 - zeta) / 2
    S = la.mat((2 * a - b) / (4 * g) + 0 * xi, 0.0,
               (2 * xi - 1) * b / (4 * g) - d * B2xi * (2 * xi - 1) / (2 * X), d * B2xi / (2 * X))
    logdet = np.log((2 * a - b) / (4 * g) * B2xi / (2 * X)) - dc.log_delta
    return B1, B2, S, logdet


def mapC_local(dc, xi, eta_c):
    """C on T0 with xi = (X + X0)/(2 X0), eta_c = (y + X0)/(2 X0)."""
    xi, eta_c = np.broadcast_arrays(np.asarray(xi, float), np.asarray(eta_c, float))
    cs = dc.cs
    a, b, g, X0 = dc.alpha, dc.beta, dc.gamma, dc.X0
    u = cs.L1 + g * xi
    ei = cs.profile.eta_inverse(np.clip(u, cs.L1, cs.L2))
    C1 = b / (2 * a) * (ei - cs.u_lo) + dc.Ptc1 - b / 4
    y = X0 * (2 * eta_c - 1)
    C2 = y * (b / 4) / X0
    D = la.mat(b / (2 * a) * g / (2 * X0) / cs.profile.eta_prime(ei), 0.0, 0.0, b / (4 * X0) + 0 * xi)
    return C1, C2, D, np.log(la.det(D))


def mapA(dc, x, y):
    """A(x, y) on T1 in absolute R_t coordinates, with the Jacobian DA."""
    xi, zeta = _chart_top(dc, x, y)
    A1, A2, S, _ = mapA_local(dc, xi, zeta)
    return A1, A2, S / dc.delta


def mapB(dc, x, y):
    xi, zeta = _chart_right(dc, x, y)
    B1, B2, S, _ = mapB_local(dc, xi, zeta)
    return B1, B2, S / dc.delta


def mapC(dc, x, y):
    X0 = dc.X0
    xi = (np.asarray(x) - dc.Pc1 + X0) / (2 * X0)
    ec = (np.asarray(y) + X0) / (2 * X0)
    C1, C2, D, _ = mapC_local(dc, xi, ec)
    return C1, C2, D


def _chart_top(dc, x, y):
    y = np.asarray(y, float)
    zeta = np.clip((dc.gamma / 2 - y) / (dc.gamma * dc.delta), 0.0, 1.0)
    xi = (np.asarray(x, float) - dc.Pc1 + y) / (2 * y)
    return xi, zeta


def _chart_right(dc, x, y):
    X = np.asarray(x, float) - dc.Pc1
    zeta = np.clip((dc.gamma / 2 - X) / (dc.gamma * dc.delta), 0.0, 1.0)
    xi = (np.asarray(y, float) / X + 1) / 2
    return xi, zeta


# ------------------------------------------------------- piece bookkeeping

PIECES = ("T0", "T1", "T2", "T3", "T4")
RY = np.diag([1.0, -1.0])
RX = np.diag([-1.0, 1.0])


def classify_piece(dc, x, y):
    """Index 0..4 of the trapezoid containing (x, y) in R_t."""
    X = np.asarray(x, float) - dc.Pc1
    Y = np.asarray(y, float)
    out = np.where(Y >= np.abs(X), 1, np.where(Y <= -np.abs(X), 3, np.where(X > 0, 2, 4)))
    centre = (np.abs(X) <= dc.X0) & (np.abs(Y) <= dc.X0)
    return np.where(centre, 0, out)


def piece_local(dc, k, xi, zeta):
    """Sample piece k at chart coordinates.

    Returns (x, y, U, V, S, log_scale, logdet_g, log_area): source point in R_t,
    image in R~_t, scaled Jacobian with Dg = S * exp(log_scale), log det Dg and
    log of the chart's area element.
    """
    g = dc.gamma
    if k == 0:
        X0 = dc.X0
        U, V, S, ld = mapC_local(dc, xi, zeta)
        x = dc.Pc1 + X0 * (2 * xi - 1)
        y = X0 * (2 * zeta - 1)
        return x, y, U, V, S, 0.0 * x, ld, np.full(np.shape(x), math.log(4 * X0 * X0))
    if k in (1, 3):
        U, V, S, ld = mapA_local(dc, xi, zeta)
        y = g / 2 - g * dc.delta * zeta
        x = dc.Pc1 + y * (2 * xi - 1)
        if k == 3:
            y, V, S = -y, -V, RY @ S @ RY
        la_ = np.log(2 * np.abs(y) * g) + dc.log_delta
        return x, y, U, V, S, -dc.log_delta + 0 * x, ld, la_
    U, V, S, ld = mapB_local(dc, xi, zeta)
    X = g / 2 - g * dc.delta * zeta
    y = X * (2 * xi - 1)
    x = dc.Pc1 + X
    if k == 4:
        x = 2 * dc.Pc1 - x
        U = 2 * dc.Ptc1 - U
        S = RX @ S @ RX
    la_ = np.log(2 * X * g) + dc.log_delta
    return x, y, U, V, S, -dc.log_delta + 0 * x, ld, la_


def _graded(centre, w, ratio, lo=0.0, hi=1.0):
    pts = {lo, hi, min(max(centre, lo), hi)}
    h = w / 8
    while h < hi - lo:
        for q in (centre - h, centre + h):
            if lo < q < hi:
                pts.add(q)
        h *= ratio
    return np.array(sorted(pts))


def kink_panels(dc, ratio=4.0):
    """Panel breakpoints (xi, zeta) for T1/T3.

    Two features need resolving: the column where dA1/dzeta = 0, where |DF|
    behaves like sqrt(a^2 + (beta/alpha)^2), and the inner edge zeta = 1,
    where the target width shrinks from alpha to beta/2 so that K grows like
    1/(1 - zeta + beta/(2 alpha)).
    """
    cs = dc.cs
    xs = float((cs.profile.eta(cs.u_lo + dc.alpha / 2) - cs.L1) / dc.gamma)
    w = max(dc.beta / dc.alpha, 1e-14)
    return _graded(xs, w, ratio), _graded(1.0, w / 2, ratio)


def piece_map(dc, k, x, y):
    """The formula of piece k evaluated at (x, y), whether or not the point lies in it."""
    x, y = np.broadcast_arrays(np.asarray(x, float), np.asarray(y, float))
    if k == 0:
        return mapC(dc, x, y)
    if k in (1, 3):
        sgn = 1.0 if k == 1 else -1.0
        a1, a2, DA = mapA(dc, x, sgn * y)
        return a1, sgn * a2, (DA if k == 1 else RY @ DA @ RY)
    xr = x if k == 2 else 2 * dc.Pc1 - x
    b1, b2, DB = mapB(dc, xr, y)
    if k == 2:
        return b1, b2, DB
    return 2 * dc.Ptc1 - b1, b2, RX @ DB @ RX


def squeezed_f4_inv(dc, x, y):
    """Pointwise squeezed f4^-1 on R_t: (U, V, Dg)."""
    x, y = np.broadcast_arrays(np.asarray(x, float), np.asarray(y, float))
    k = classify_piece(dc, x, y)
    U = np.empty(x.shape)
    V = np.empty(x.shape)
    D = np.empty(x.shape + (2, 2))
    for kk in range(5):
        m = k == kk
        if np.any(m):
            U[m], V[m], D[m] = piece_map(dc, kk, x[m], y[m])
    return U, V, D


def classify_target_piece(dc, U, V):
    cs = dc.cs
    a, b = dc.alpha, dc.beta
    Xt = np.asarray(U, float) - dc.Ptc1
    V = np.asarray(V, float)
    zeta = np.clip(4 * (b / 2 - np.abs(V)) / b, 0.0, 1.0)
    xp = (2 * a - b) * zeta / 4 + cs.u_lo
    lt = a - (a - b / 2) * zeta
    in_tb = (np.abs(V) >= b / 4) & (U >= xp) & (U <= xp + lt)
    out = np.where(in_tb, np.where(V > 0, 1, 3), np.where(Xt > 0, 2, 4))
    centre = (np.abs(Xt) <= b / 4) & (np.abs(V) <= b / 4)
    return np.where(centre, 0, out)


def squeezed_f4(dc, U, V):
    """Inverse of squeezed_f4_inv: R~_t -> R_t."""
    cs = dc.cs
    a, b, g, d = dc.alpha, dc.beta, dc.gamma, dc.delta
    U, V = np.broadcast_arrays(np.asarray(U, float), np.asarray(V, float))
    k = classify_target_piece(dc, U, V)
    x = np.empty(U.shape)
    y = np.empty(U.shape)
    m = k == 0
    if np.any(m):
        ei = (U[m] - dc.Ptc1 + b / 4) * (2 * a / b) + cs.u_lo
        xi = (cs.profile.eta(np.clip(ei, cs.u_lo, cs.u_hi)) - cs.L1) / g
        x[m] = dc.Pc1 + dc.X0 * (2 * xi - 1)
        y[m] = V[m] * dc.X0 / (b / 4)
    for kk, sgn in ((1, 1.0), (3, -1.0)):
        m = k == kk
        if np.any(m):
            zeta = 4 * (b / 2 - sgn * V[m]) / b
            lt = a - (a - b / 2) * zeta
            xp = (2 * a - b) * zeta / 4 + cs.u_lo
            ei = (U[m] - xp) * a / lt + cs.u_lo
            xi = (cs.profile.eta(np.clip(ei, cs.u_lo, cs.u_hi)) - cs.L1) / g
            yy = g / 2 - g * d * zeta
            x[m] = dc.Pc1 + yy * (2 * xi - 1)
            y[m] = sgn * yy
    for kk in (2, 4):
        m = k == kk
        if np.any(m):
            B1 = U[m] if kk == 2 else 2 * dc.Ptc1 - U[m]
            zeta = 4 * (cs.u_hi - B1) / (2 * a - b)
            s2 = 4 * V[m] / (b * (2 - zeta))
            X = g / 2 - g * d * zeta
            x[m] = dc.Pc1 + X if kk == 2 else dc.Pc1 - X
            y[m] = X * s2
    return x, y


class SqueezedMiddle:
    """Drop-in replacement for the simple f4^-1 inside a CellMap."""

    name = "squeezed"

    def __init__(self, cs, params):
        self.cs = cs
        self.params = params
        self.dc = decompose(cs, params)

    def __call__(self, x, y):
        U, V, _ = squeezed_f4_inv(self.dc, x, y)
        return U, V

    def jac(self, x, y):
        return squeezed_f4_inv(self.dc, x, y)[2]

    def inverse(self, U, V):
        return squeezed_f4(self.dc, U, V)

    def inverse_jac(self, U, V):
        x, y = squeezed_f4(self.dc, U, V)
        return la.inv(self.jac(x, y))


def squeezed_factory(params):
    return lambda cs, j: SqueezedMiddle(cs, params)


def squeezed_F_t(z, t, s, params):
    from .cusp import CellMap, cell
    cs = cell(t, s)
    return CellMap(cs, SqueezedMiddle(cs, params)).F(z)


def squeezed_E1(z, s, j0, params):
    from .cusp import DyadicCells, as_profile
    return DyadicCells(as_profile(s), j0, squeezed_factory(params)).E1(z)

"""Distortion quadrature over dyadic cells, slope fits, critical exponents, thresholds.

All cell integrals are accumulated in log space: integrand values and chart
weights are logs, combined with logsumexp. This is what lets the squeezed
construction be integrated at scales where delta_t underflows.
"""
from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache
import json
import math

import numpy as np
from scipy.special import logsumexp

from . import linalg2 as la
from .cusp import Df3_inv, Df4_simple_inv, polar_rect
from .squeeze import PIECES, SqueezedMiddle, kink_panels, piece_local

QUANTITIES = ("Kf", "Kfinv", "Df", "Dfinv", "J", "area")
LN2 = math.log(2.0)


# ------------------------------------------------------------- pointwise

def jacobian_fd(fn, z, h=1e-6, richardson=False):
    """Central-difference Jacobian of fn: (..., 2) -> (..., 2) at z."""
    z = np.asarray(z, dtype=float)

    def cd(hh):
        cols = []
        for k in range(2):
            e = np.zeros(2)
            e[k] = hh
            fp = np.asarray(fn(z + e), dtype=float)
            fm = np.asarray(fn(z - e), dtype=float)
            if not (np.all(np.isfinite(fp)) and np.all(np.isfinite(fm))):
                raise ValueError("map evaluation failed at a stencil point")
            cols.append((fp - fm) / (2 * hh))
        return np.stack(cols, -1)

    D = cd(h)
    if richardson:
        D = (4 * cd(h / 2) - D) / 3
    return D


@dataclass(frozen=True)
class DistortionSample:
    point: tuple
    jac: la.JacobianMatrix
    opnorm: float
    det: float
    K: float

    @classmethod
    def at(cls, point, D):
        J = la.JacobianMatrix.from_array(D)
        return cls(tuple(map(float, point)), J, J.opnorm, J.det, J.K)


# ------------------------------------------------------ per-cell sampling

CHUNK_NODES = 1 << 18

@lru_cache(maxsize=16)
def _gauss(n):
    x, w = np.polynomial.legendre.leggauss(n)
    return 0.5 * (x + 1), 0.5 * w


def _simple_local(cs, xi, zeta):
    x = cs.L1 + cs.sigma * xi
    y = cs.sigma * (zeta - 0.5)
    U = cs.profile.eta_inverse(x)
    V = 2 * cs.H / cs.sigma * y
    S = Df4_simple_inv(cs, x, y)
    ld = np.log(la.det(S))
    return x, y, U, V, S, 0 * x, ld, np.full(np.shape(x), 2 * math.log(cs.sigma))


@dataclass
class CellLogs:
    """Log singular data of DF at the quadrature nodes of one piece."""

    log_smax: np.ndarray
    log_smin: np.ndarray
    log_det: np.ndarray
    log_w: np.ndarray  # log(node weight * |d z / d chart|)


def piece_logs(cm, k, xi, zeta):
    cs = cm.cs
    if isinstance(cm.middle, SqueezedMiddle):
        x, y, U, V, S, ls, ld, lar = piece_local(cm.middle.dc, k, xi, zeta)
    else:
        x, y, U, V, S, ls, ld, lar = _simple_local(cs, xi, zeta)
    _, _, Dh = polar_rect(cs, x, y)
    M = Df3_inv(cs, U, V)
    T = M @ S @ la.inv(Dh)
    smax, _ = la.singular_values(T)
    log_smax = np.log(smax) + ls
    log_jh = np.log(np.abs(la.det(Dh)))
    log_det = np.log(np.abs(la.det(M))) + ld - log_jh
    return log_smax, log_det - log_smax, log_det, lar + log_jh


def pieces_of(cm):
    return range(len(PIECES)) if isinstance(cm.middle, SqueezedMiddle) else (0,)


def _composite(breaks, n):
    gx, gw = _gauss(n)
    h = np.diff(breaks)
    x = (breaks[:-1, None] + h[:, None] * gx[None, :]).ravel()
    w = (h[:, None] * gw[None, :]).ravel()
    return x, w


def cell_logs(cm, n):
    gx, gw = _gauss(n)
    out = []
    for k in pieces_of(cm):
        if k in (1, 3):
            # graded panels already resolve the layers; a lower per-panel order
            # keeps the node count near n^2 when there are dozens of panels
            xb, zb = kink_panels(cm.middle.dc)
            m = max(2, n // 4)
            xx, xw = _composite(xb, m)
            zz, zw = _composite(zb, m)
        else:
            xx, xw, zz, zw = gx, gw, gx, gw
        # row chunks bound the transient 2x2 matrix stacks
        step = max(1, CHUNK_NODES // len(zz))
        parts = [piece_logs(cm, k, *np.meshgrid(xx[i:i + step], zz, indexing="ij"))
                 for i in range(0, len(xx), step)]
        a, b, c, d = (np.concatenate(v) for v in zip(*parts))
        out.append(CellLogs(a, b, c, d + np.log(np.outer(xw, zw))))
    return out


def log_integrand(cl, quantity, e):
    """Log of the integrand on the source cell (inverse quantities pulled back)."""
    if quantity == "Kf":
        return e * (cl.log_smax - cl.log_smin)
    if quantity == "Df":
        return e * cl.log_smax
    if quantity == "J":
        return cl.log_det
    if quantity == "Kfinv":
        return e * (cl.log_smax - cl.log_smin) + cl.log_det
    if quantity == "Dfinv":
        return -e * cl.log_smin + cl.log_det
    if quantity == "area":
        return 0 * cl.log_det
    raise ValueError(f"unknown quantity {quantity!r}")


@dataclass
class CellIntegral:
    log_value: float
    n: int
    converged: bool
    pieces: dict = field(default_factory=dict)

    @property
    def value(self):
        return math.exp(self.log_value) if self.log_value > -745 else 0.0

    @property
    def log2_value(self):
        return self.log_value / LN2


class CellQuadrature:
    """Adaptive tensor Gauss-Legendre on each piece chart, node data cached by (j, n)."""

    def __init__(self, scenario, n0=8, n_max=256, rtol=1e-6):
        self.scenario = scenario
        self.cells = scenario.cells()
        self.n0, self.n_max, self.rtol = n0, n_max, rtol
        self._logs = {}
        self._start = {}  # per cell: lowest level still worth starting from

    def logs(self, j, n):
        key = (int(j), int(n))
        if key not in self._logs:
            self.scenario.check_j(j)
            self._logs[key] = cell_logs(self.cells.cell_map(j), n)
        return self._logs[key]

    def _settle(self, j, n):
        # later exponents restart one level below the last accepted one; coarser levels are dropped
        lo = max(self.n0, n // 2)
        self._start[j] = max(self._start.get(j, self.n0), lo)
        for key in [k for k in self._logs if k[0] == j and k[1] < self._start[j]]:
            del self._logs[key]

    def integral(self, j, quantity, e=1.0):
        j = int(j)
        prev = None
        n = self._start.get(j, self.n0)
        while True:
            per = [logsumexp(log_integrand(cl, quantity, e) + cl.log_w) for cl in self.logs(j, n)]
            tot = float(logsumexp(per))
            done = prev is not None and abs(math.expm1(tot - prev)) < self.rtol
            if done or n >= self.n_max:
                self._settle(j, n)
                return CellIntegral(tot, n, done, dict(zip(PIECES, map(float, per))))
            prev = tot
            n *= 2


def cell_integral(scenario, j, quantity, e=1.0, **quad):
    return CellQuadrature(scenario, **quad).integral(j, quantity, e)


# ------------------------------------------------------------ dyadic fits

def fit_slope(js, log2_vals):
    js = np.asarray(js, dtype=float)
    y = np.asarray(log2_vals, dtype=float)
    A = np.vstack([js, np.ones_like(js)]).T
    coef, res, *_ = np.linalg.lstsq(A, y, rcond=None)
    n = len(js)
    if n > 2:
        resid = y - A @ coef
        se = math.sqrt(float(resid @ resid) / (n - 2) / float(((js - js.mean()) ** 2).sum()))
    else:
        se = 0.0
    return float(coef[0]), float(coef[1]), se


def verdict(slope, margin=0.1, converged=True):
    if not converged:
        return "inconclusive"
    if slope < -margin:
        return "converges"
    if slope > margin:
        return "diverges"
    return "critical"


@dataclass
class DyadicSeriesReport:
    scenario: dict
    quantity: str
    exponent: float
    j: list
    log2_integral: list
    slope: float
    intercept: float
    slope_stderr: float
    verdict: str
    converged: bool

    @property
    def integral(self):
        # linear values leave double range long before the log2 values do
        return [math.inf if v >= 1024 else 2.0 ** v if v > -1070 else 0.0 for v in self.log2_integral]

    @property
    def log2_ratio(self):
        v = self.log2_integral
        return [v[i + 1] - v[i] for i in range(len(v) - 1)]

    def log2_partial_sums(self):
        return list(np.logaddexp.accumulate(np.asarray(self.log2_integral) * LN2) / LN2)

    def to_json(self):
        d = {"scenario": self.scenario, "quantity": self.quantity, "exponent": self.exponent,
             "j": self.j, "integral": self.integral, "log2_integral": self.log2_integral,
             "log2_ratio": self.log2_ratio, "slope": self.slope, "slope_stderr": self.slope_stderr,
             "verdict": self.verdict, "converged": self.converged}
        return json.dumps(d, sort_keys=True, default=_fmt17)

    def to_csv(self):
        lines = ["j,integral,log2_ratio"]
        ratios = self.log2_ratio + [float("nan")]
        for j, v, r in zip(self.j, self.integral, ratios):
            lines.append(f"{j},{v:.17g},{r:.17g}")
        return "\n".join(lines) + "\n"


def _fmt17(o):
    if isinstance(o, (np.floating, np.integer)):
        return o.item()
    raise TypeError(type(o))


def dyadic_series(quad, quantity, e, js, margin=0.1):
    vals = [quad.integral(j, quantity, e) for j in js]
    lv = [v.log2_value for v in vals]
    slope, icpt, se = fit_slope(js, lv)
    ok = all(v.converged for v in vals)
    return DyadicSeriesReport(quad.scenario.descriptor(), quantity, float(e), [int(j) for j in js],
                              lv, slope, icpt, se, verdict(slope, margin, ok), ok)


@dataclass
class CriticalExponent:
    value: float
    uncertainty: float
    slope: float
    evaluations: int


def critical_exponent_scan(quad, quantity, bracket, js, tol=0.02, max_iter=60):
    """Bisect the exponent until the fitted dyadic slope is within tol of zero."""
    lo, hi = map(float, bracket)
    slope = lambda e: dyadic_series(quad, quantity, e, js).slope
    s_lo, s_hi = slope(lo), slope(hi)
    if s_lo * s_hi > 0:
        raise ValueError(f"no sign change of the fitted slope in [{lo}, {hi}]")
    dsde = (s_hi - s_lo) / (hi - lo)
    k = 2
    mid, s_mid = lo, s_lo
    for _ in range(max_iter):
        mid = 0.5 * (lo + hi)
        s_mid = slope(mid)
        k += 1
        if abs(s_mid) <= tol:
            break
        if (s_mid < 0) == (s_lo < 0):
            lo, s_lo = mid, s_mid
        else:
            hi, s_hi = mid, s_mid
    return CriticalExponent(mid, 0.1 / abs(dsde), s_mid, k)


# ------------------------------------------------------------- thresholds

def _frac(x):
    if isinstance(x, Fraction):
        return x
    if isinstance(x, int):
        return Fraction(x)
    return Fraction(str(x)).limit_denominator(10 ** 9)


@dataclass(frozen=True)
class ThresholdSet:
    s: Fraction
    q_Kf: Fraction
    p_inv: Fraction
    q_Kfinv: Fraction
    q_combined: Fraction = None
    p: Fraction = None


def q_combined(p, s):
    p, s = _frac(p), _frac(s)
    return max(1 / (s - 1), combined_M(p, s))


def combined_M(p, s):
    p, s = _frac(p), _frac(s)
    return 3 * p / ((2 * s - 1) * p + 4 - 2 * s)


def r_transfer(p, q):
    p, q = _frac(p), _frac(q)
    if p == q:
        raise ValueError("transfer exponent undefined for p = q")
    return ((q + 1) * p - 2 * q) / (p - q)


def thresholds(s, p=None):
    s = _frac(s)
    if s <= 1:
        raise ValueError("s must exceed 1")
    if p is not None and _frac(p) <= 1:
        raise ValueError("p must exceed 1")
    return ThresholdSet(
        s=s,
        q_Kf=max(Fraction(1), 1 / (s - 1)),
        p_inv=2 * (s + 1) / (2 * s - 1),
        q_Kfinv=(s + 1) / (s - 1),
        q_combined=None if p is None else q_combined(p, s),
        p=None if p is None else _frac(p),
    )


def predicted_slope(quantity, e, s):
    """Dyadic log2 slope of the simple construction's cell integrals."""
    if quantity == "Kf":
        return 2 * (e * (s - 1) - 1)
    if quantity == "Kfinv":
        return 2 * ((s - 1) * e - (s + 1))
    if quantity == "Dfinv":
        return -(2 * (s + 1) + e * (1 - 2 * s))
    if quantity == "Df":
        return -(2 + e)
    raise ValueError(quantity)

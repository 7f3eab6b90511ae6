"""Lower-bound test functions: strip ramp, annulus geodesic distance, segment oscillation.

These are the objects that force the integrability thresholds to be sharp.
Each returns the scaling quantity (an energy or an oscillation) per dyadic t,
so a harness can check the predicted power law.
"""
from dataclasses import dataclass, field

import numpy as np

from . import _kernels
from .analysis import fit_slope
from .geometry import in_Ms
from .scenario import Scenario


# ------------------------------------------------------------ strip ramp

def _ramp_integral(s, a, b):
    """int_a^b (-x)^-s dx for a <= b < 0."""
    return ((-b) ** (1 - s) - (-a) ** (1 - s)) / (s - 1)


def strip_testfn_v(s, t, point):
    """1 left of x = -t^2, 0 right of x = -(t/2)^2, the (-x)^-s ramp between.

    The value depends on x only; points outside the cusp still get the ramp value.
    """
    p = np.asarray(point, dtype=float)
    x = p[..., 0]
    a, b = -t * t, -t * t / 4
    total = _ramp_integral(s, a, b)
    xc = np.clip(x, a, b)
    return 1 - _ramp_integral(s, a, xc) / total


def strip_energy(s, t, n=64):
    """int over the cusp strip {-t^2 <= x <= -(t/2)^2, |y| <= (-x)^s} of |Dv|^2.

    |Dv| = (-x)^-s / I, the strip height is 2 (-x)^s, so the integrand in x is
    2 (-x)^-s / I^2; integrated by Gauss-Legendre in log(-x).
    """
    a, b = -t * t, -t * t / 4
    total = _ramp_integral(s, a, b)
    g, w = np.polynomial.legendre.leggauss(n)
    lo, hi = np.log(-b), np.log(-a)
    lu = 0.5 * (hi - lo) * g + 0.5 * (hi + lo)
    u = np.exp(lu)
    integrand = 2 * u ** (-s) / total ** 2 * u  # dx = u dlu
    return float(0.5 * (hi - lo) * np.sum(w * integrand))


def strip_energy_exact(s, t):
    return 2 / _ramp_integral(s, -t * t, -t * t / 4)


@dataclass
class ScalingReport:
    js: np.ndarray
    values: np.ndarray
    exponent: float          # slope of log2(value) against log2(t)
    stderr: float
    extra: dict = field(default_factory=dict)

    def to_json(self):
        return {"j": [int(j) for j in self.js], "values": [float(v) for v in self.values],
                "exponent": self.exponent, "stderr": self.stderr, **self.extra}


def strip_scaling(s, js=range(6, 15)):
    js = np.asarray(list(js))
    vals = np.array([strip_energy(s, 2.0 ** -j) for j in js])
    slope, _, err = fit_slope(js, np.log2(vals))
    # log2 t = -j
    return ScalingReport(js, vals, -slope, err)


# ------------------------------------------------------- annulus distance

def _sqrt_arc(s, x, sign):
    """Square roots (right half-plane) of (x, sign |x|^s), x < 0."""
    w = np.asarray(x, float) + 1j * sign * (-np.asarray(x, float)) ** s
    z = np.sqrt(w)
    return np.stack([z.real, z.imag], -1)


@dataclass
class AnnulusField:
    s: float
    t: float
    L1: float
    L2: float
    Lt: float
    lam: np.ndarray          # log radius nodes
    th: np.ndarray           # angle nodes, periodic
    v: np.ndarray            # weighted distance to the seed arc, shape (n_lam, n_th)
    seed: np.ndarray         # seed arc in (lam, th)
    target: np.ndarray       # opposite arc in (lam, th)

    @property
    def cost(self):
        # rho(w) |w| = L2 / Lt is constant, so in (log r, theta) the metric is flat
        return self.L2 / self.Lt

    def exact(self, lam, th):
        """Closed form: cost * cylinder distance to the sampled seed arc."""
        lam, th = np.broadcast_arrays(np.asarray(lam, float), np.asarray(th, float))
        fl, ft = lam.ravel(), th.ravel()
        out = np.empty(fl.size)
        for k in range(0, fl.size, 4096):
            d = np.abs(ft[k:k + 4096, None] - self.seed[:, 1])
            d = np.minimum(d, 2 * np.pi - d)
            out[k:k + 4096] = np.sqrt((fl[k:k + 4096, None] - self.seed[:, 0]) ** 2 + d ** 2).min(-1)
        return self.cost * out.reshape(lam.shape)

    def value_on_target(self):
        lam, th = self.target[:, 0], self.target[:, 1]
        return _bilinear_periodic(self.lam, self.th, self.v, lam, th)

    def energy(self, s_domain=None):
        """int over the annulus minus M_s of |Dv|^2 (conformally: flat in (lam, th))."""
        s_domain = self.s if s_domain is None else s_domain
        hl = self.lam[1] - self.lam[0]
        ht = self.th[1] - self.th[0]
        v = self.v
        # cell-centred gradient
        vl = 0.5 * ((v[1:, 1:] - v[:-1, 1:]) + (v[1:, :-1] - v[:-1, :-1])) / hl
        vr = np.roll(v, -1, axis=1)
        vt = 0.5 * ((vr[1:, :-1] - v[1:, :-1]) + (vr[:-1, :-1] - v[:-1, :-1])) / ht
        vt = vt[:, : v.shape[1] - 1]
        lc = 0.5 * (self.lam[1:] + self.lam[:-1])
        tc = self.th[:-1] + ht / 2
        L, T = np.meshgrid(lc, tc, indexing="ij")
        r = np.exp(L)
        pts = np.stack([r * np.cos(T), r * np.sin(T)], -1)
        outside = in_Ms(s_domain, pts, method="radial") == 0
        return float(np.sum((vl ** 2 + vt ** 2)[outside]) * hl * ht)

    def energy_bound(self, s_domain=None):
        """int over the same region of rho^2 (the pointwise bound |Dv| <= rho)."""
        s_domain = self.s if s_domain is None else s_domain
        hl = self.lam[1] - self.lam[0]
        ht = self.th[1] - self.th[0]
        lc = 0.5 * (self.lam[1:] + self.lam[:-1])
        tc = self.th[:-1] + ht / 2
        L, T = np.meshgrid(lc, tc, indexing="ij")
        r = np.exp(L)
        pts = np.stack([r * np.cos(T), r * np.sin(T)], -1)
        outside = in_Ms(s_domain, pts, method="radial") == 0
        return float(np.count_nonzero(outside) * hl * ht * self.cost ** 2)


def _bilinear_periodic(lam, th, v, ql, qt):
    hl = lam[1] - lam[0]
    ht = th[1] - th[0]
    n = len(th)
    fl = np.clip((ql - lam[0]) / hl, 0, len(lam) - 1 - 1e-12)
    ft = np.mod(qt - th[0], 2 * np.pi) / ht
    i = np.floor(fl).astype(int)
    j = np.floor(ft).astype(int) % n
    a = fl - i
    b = ft - np.floor(ft)
    j1 = (j + 1) % n
    return ((1 - a) * (1 - b) * v[i, j] + a * (1 - b) * v[i + 1, j]
            + (1 - a) * b * v[i, j1] + a * b * v[i + 1, j1])


def annulus_testfn_v(s, t, n_lam=256, n_th=1024, backend=None):
    """Weighted distance to the preimage of the lower cusp arc, by fast marching.

    The annulus is L1 <= |w| <= L2 where L1, L2 bound the preimage of the upper
    arc; rho(w) = L2 / (Lt |w|) with Lt the distance between the two preimages.
    """
    if n_lam < 256 or n_th < 256:
        raise ValueError("annulus grid must be at least 256 x 256")
    xs = -np.geomspace(t * t / 4, t * t, 2049)
    lower = _sqrt_arc(s, xs, -1.0)
    upper = _sqrt_arc(s, xs, 1.0)
    r_up = np.hypot(upper[:, 0], upper[:, 1])
    L1, L2 = float(r_up.min()), float(r_up.max())
    diff = lower[:, None, :] - upper[None, ::8, :]
    Lt = float(np.sqrt((diff ** 2).sum(-1)).min())

    lam = np.linspace(np.log(L1), np.log(L2), n_lam)
    th = np.linspace(-np.pi, np.pi, n_th, endpoint=False)
    hl = lam[1] - lam[0]
    ht = th[1] - th[0]

    def polar(p):
        return np.stack([np.log(np.hypot(p[:, 0], p[:, 1])), np.arctan2(p[:, 1], p[:, 0])], -1)

    seed = polar(lower)
    target = polar(upper)
    cost_val = L2 / Lt
    cost = np.full((n_lam, n_th), cost_val)
    # seed band: grid nodes within one cell of the seed arc get exact values
    L, T = np.meshgrid(lam, th, indexing="ij")
    field_ = AnnulusField(s, t, L1, L2, Lt, lam, th, None, seed, target)
    band = (np.abs(np.mod(T - seed[:, 1].mean() + np.pi, 2 * np.pi) - np.pi)
            <= np.ptp(seed[:, 1]) / 2 + 1.5 * ht)
    t0 = np.full((n_lam, n_th), np.inf)
    t0[band] = field_.exact(L[band], T[band])
    v = _kernels.fast_march(cost, t0, band, hl, ht, periodic_y=True, backend=backend)
    field_.v = v
    return field_


def annulus_energy(s, t, n_lam=256, n_th=1024):
    return annulus_testfn_v(s, t, n_lam, n_th).energy()


def annulus_scaling(s, js=range(6, 11), n_lam=256, n_th=1024):
    js = np.asarray(list(js))
    fields = [annulus_testfn_v(s, 2.0 ** -j, n_lam, n_th) for j in js]
    vals = np.array([f.energy() for f in fields])
    slope, _, err = fit_slope(js, np.log2(vals))
    vmin = [float(f.value_on_target().min()) for f in fields]
    return ScalingReport(js, vals, -slope, err,
                         {"max_over_min": float(vals.max() / vals.min()),
                          "ratio_to_log2": [float(v / np.log(2)) for v in vals],
                          "min_v_on_target": vmin})


# ------------------------------------------------------------ oscillation

def oscillation(scenario, j, n=257):
    """Diameter of E^-1 over the vertical segment I_x at x = -4^-j."""
    cells = scenario.cells()
    prof = scenario.profile
    U = 4.0 ** -j
    h = float(prof.phi(U))
    y = np.linspace(-h, h, n)
    w = np.stack([np.full(n, -U), y], -1)
    pre = cells.cell_map(j).F_inv(w)
    d = pre[:, None, :] - pre[None, :, :]
    return float(np.sqrt((d ** 2).sum(-1)).max())


def oscillation_check(scenario=None, js=range(6, 13), n=257):
    scenario = scenario or Scenario()
    js = np.asarray(list(js))
    osc = np.array([oscillation(scenario, j, n) for j in js])
    ratio = osc / np.sqrt(4.0 ** -js)
    slope, _, err = fit_slope(js, np.log2(osc))
    return ScalingReport(js, osc, -slope, err,
                         {"normalised": [float(r) for r in ratio],
                          "c": float(ratio.min()), "C": float(ratio.max()),
                          "max_over_min": float(ratio.max() / ratio.min())})


def lemma_exponent(p, s):
    """p/2 - s(p - 1): the x-power whose integrability caps p for the inverse."""
    return p / 2 - s * (p - 1)

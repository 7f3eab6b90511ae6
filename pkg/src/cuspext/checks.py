"""Structural checks on the assembled map, shared by `verify` and the test-suite.

Every check returns a dict with the measured number(s), the threshold and `ok`.
"""
import math

import numpy as np

from . import linalg2 as la
from .analysis import jacobian_fd
from .cusp import CellMap, DyadicCells, cell, f1, f1_inv, f2, f2_inv, f3, f3_inv, f4_simple, f4_simple_inv
from .cusp import Df1, Df2, Df3, Df4_simple
from .extension import Extension, grid_injectivity, square
from .scenario import Scenario
from .squeeze import SqueezedMiddle, SqueezeParams, classify_piece, decompose, piece_map

POINTWISE_DELTA = 0.05  # resolvable squeeze for pointwise checks


def _result(name, value, limit, ok=None, **extra):
    ok = bool(value <= limit) if ok is None else bool(ok)
    return {"check": name, "value": float(value), "limit": float(limit), "ok": ok, **extra}


def _cell_points(cm, n, rng):
    """Random points of Q_t (through the rectangle chart)."""
    cs = cm.cs
    x = rng.uniform(cs.L1, cs.L2, n)
    y = rng.uniform(-cs.sigma / 2, cs.sigma / 2, n) * (1 - 1e-9)
    return cm.from_rect(x, y)


def pointwise_cells(scenario):
    """Cells for pointwise checks: squeezed cells get the resolvable delta.

    Absolute coordinates carry rounding of order ulp(L2), which the squeezed
    charts amplify by 1/delta; with the true delta (e^-64 and below) pointwise
    comparisons measure rounding, not the construction.
    """
    if scenario.construction != "squeezed":
        return scenario.cells()

    def factory(cs, j):
        mid = SqueezedMiddle(cs, scenario.squeeze)
        mid.dc = decompose(cs, POINTWISE_DELTA)
        return mid

    return DyadicCells(scenario.profile, scenario.first_cell, factory)


def boundary_compatibility(scenario, js=range(6, 15), n=200):
    """E against z^2 on the cusp arcs bounding Omega_1."""
    cells = pointwise_cells(scenario)
    prof = scenario.profile
    worst = 0.0
    for j in js:
        if j < scenario.first_cell:
            continue
        U = np.linspace(4.0 ** -(j + 1), 4.0 ** -j, n)
        for sgn in (1.0, -1.0):
            z = np.sqrt(-U + 1j * sgn * prof.phi(U))
            pts = np.stack([z.real, z.imag], -1)
            cm = cells.cell_map(j)
            try:
                err = np.hypot(*(cm.F(pts) - square(pts)).T) / np.hypot(*square(pts).T)
            except ValueError:
                # an arc point falling outside its cell is itself a compatibility failure
                return _result("boundary_compatibility", math.inf, 1e-9, failed_cell=j)
            worst = max(worst, float(err.max()))
    return _result("boundary_compatibility", worst, 1e-9)


def dyadic_interfaces(scenario, js=range(7, 15), n=200):
    """Adjacent cell maps agree on the circle separating them (relative)."""
    cells = pointwise_cells(scenario)
    prof = scenario.profile
    worst = 0.0
    for j in js:
        U = 4.0 ** -j
        r = float(prof.eta(U))
        half = float(prof.ell(U)) / 2
        th = np.pi + np.linspace(-half, half, n) * (1 - 1e-12)
        pts = np.stack([r * np.cos(th), r * np.sin(th)], -1)
        a = cells.cell_map(j).F(pts)
        b = cells.cell_map(j - 1).F(pts)
        worst = max(worst, float((np.hypot(*(a - b).T) / U).max()))
    return _result("dyadic_interfaces", worst, 1e-9)


def trapezoid_interfaces(s=1.5, ts=(2.0 ** -6, 2.0 ** -8, 2.0 ** -10), n=200, delta=POINTWISE_DELTA):
    """The five piece formulas agree on their shared edges (relative to the cell size)."""
    worst = 0.0
    for t in ts:
        cs = cell(t, s)
        dc = decompose(cs, delta)
        X0, g = dc.X0, dc.gamma / 2
        a = np.linspace(X0, g, n)
        b = np.linspace(-X0, X0, n)
        pairs = [
            # diagonals between the side trapezoids
            (1, 2, a, a), (2, 3, a, -a), (3, 4, -a, -a), (4, 1, -a, a),
            # edges of the centre square
            (0, 1, b, np.full(n, X0)), (0, 3, b, np.full(n, -X0)),
            (0, 2, np.full(n, X0), b), (0, 4, np.full(n, -X0), b),
        ]
        for k1, k2, X, Y in pairs:
            x = dc.Pc1 + X
            u1, v1, _ = piece_map(dc, k1, x, Y)
            u2, v2, _ = piece_map(dc, k2, x, Y)
            scale = max(cs.alpha, cs.beta)
            worst = max(worst, float(np.max(np.hypot(u1 - u2, v1 - v2)) / scale))
    return _result("trapezoid_interfaces", worst, 1e-10)


def _rel_err(A, B):
    return float(np.max(np.linalg.norm(A - B, axis=(-2, -1)) / np.linalg.norm(B, axis=(-2, -1))))


def jacobian_agreement(s=1.5, n=100, seed=0):
    """Analytic vs Richardson finite-difference Jacobians, 100 points per piece."""
    rng = np.random.default_rng(seed)
    out = {}
    t = 2.0 ** -6
    cs = cell(t, s, t_max=0.5)

    def fd_err(fn, D, pts, h):
        worst = 0.0
        for p, Dp, hp in zip(pts, D, np.broadcast_to(h, len(pts))):
            worst = max(worst, _rel_err(jacobian_fd(fn, p, hp, richardson=True), Dp))
        return worst

    # cell pieces f1, f2, f3, f4 (interior points, steps at the cell's own scale)
    r = cs.L1 + cs.sigma * rng.uniform(0.05, 0.95, n)
    th = np.pi + rng.uniform(-0.9, 0.9, n) * cs.profile.ell(cs.profile.eta_inverse(r)) / 2
    pol = np.stack([r, th], -1)
    out["f1"] = fd_err(lambda p: np.stack(f1(p[0], p[1]), -1), Df1(r, th), pol, 1e-3 * cs.sigma)
    out["f2"] = fd_err(lambda p: np.stack(f2(cs, p[0], p[1]), -1), Df2(cs, r, th), pol, 1e-3 * cs.sigma)
    u = cs.u_lo + cs.alpha * rng.uniform(0.05, 0.95, n)
    v = rng.uniform(-0.95, 0.95, n) * cs.profile.phi(u)
    uv = np.stack([-u, v], -1)
    out["f3"] = fd_err(lambda p: np.stack(f3(cs, p[0], p[1]), -1), Df3(cs, -u, v), uv, 1e-3 * cs.beta)
    UV = np.stack([u, rng.uniform(-0.95, 0.95, n) * cs.H], -1)
    out["f4"] = fd_err(lambda p: np.stack(f4_simple(cs, p[0], p[1]), -1),
                       Df4_simple(cs, UV[:, 0], UV[:, 1]), UV, 1e-3 * cs.beta)

    # squeezed pieces at a resolvable delta
    dc = decompose(cs, POINTWISE_DELTA)
    for k in range(5):
        pts = _piece_points(dc, k, n, rng)
        _, _, D = piece_map(dc, k, pts[:, 0], pts[:, 1])
        out[f"T{k}"] = fd_err(lambda p, k=k: np.stack(piece_map(dc, k, p[0], p[1])[:2], -1), D, pts, 1e-4 * dc.X0)

    # regions of E
    E = Extension(Scenario(s))
    for code, name in enumerate(("Ms_closure", "Omega1", "continuation", "collar", "far_field")):
        pts = _region_points(E, code, n, rng)
        h = 1e-6 * np.maximum(np.hypot(pts[:, 0], pts[:, 1]), 1e-3)
        out[name] = fd_err(E, E.jac(pts), pts, h)
    worst = max(out.values())
    return _result("jacobian_agreement", worst, 1e-6, per_piece=out)


def _piece_points(dc, k, n, rng):
    X0, g = dc.X0, dc.gamma / 2
    pts = []
    while len(pts) < n:
        X = rng.uniform(-g, g, 4 * n)
        Y = rng.uniform(-g, g, 4 * n)
        x = dc.Pc1 + X
        kk = classify_piece(dc, x, Y)
        # keep away from the piece edges so the stencil stays inside
        margin = 1e-3 * g
        keep = (kk == k) & (np.abs(np.abs(X) - np.abs(Y)) > margin) & (np.abs(np.abs(X) - X0) > margin) \
            & (np.abs(np.abs(Y) - X0) > margin) & (np.abs(X) < g - margin) & (np.abs(Y) < g - margin)
        pts.extend(np.stack([x[keep], Y[keep]], -1))
    return np.array(pts[:n])


def _region_points(E, code, n, rng):
    lo = {0: 0.0, 1: 0.0, 2: 0.0, 3: 0.0, 4: E.R0}[code]
    hi = {0: 2.0, 1: E.rho0, 2: E.rho_c, 3: E.R0, 4: 2 * E.R0}[code]
    pts = []
    while len(pts) < n:
        r = np.sqrt(rng.uniform(lo ** 2, hi ** 2, 8 * n))
        th = rng.uniform(-np.pi, np.pi, 8 * n)
        p = np.stack([r * np.cos(th), r * np.sin(th)], -1)
        c, _ = E.region_codes(p)
        # stencil must stay inside the same region
        h = 1e-5 * np.maximum(r, 1e-3)[:, None]
        same = c == code
        for d in ((1, 0), (-1, 0), (0, 1), (0, -1)):
            same &= E.region_codes(p + h * np.array(d))[0] == code
        pts.extend(p[same])
    return np.array(pts[:n])


def positive_jacobian(s=1.5, n=10000, seed=1):
    """J_{F_t} > 0 at n random points, simple and squeezed (resolvable delta)."""
    rng = np.random.default_rng(seed)
    mins = {}
    for name in ("simple", "squeezed"):
        worst = np.inf
        for j in (6, 8, 10, 12):
            cs = cell(2.0 ** -j, s, t_max=0.5)
            mid = SqueezedMiddle(cs, SqueezeParams()) if name == "squeezed" else None
            if mid is not None:
                mid.dc = decompose(cs, POINTWISE_DELTA)
            cm = CellMap(cs, mid)
            pts = _cell_points(cm, n // 4, rng)
            det = la.det(cm.DF(pts))
            # scale-free: compare with the cell's typical det
            worst = min(worst, float((det / np.median(np.abs(det))).min()))
        mins[name] = worst
    m = min(mins.values())
    return _result("positive_jacobian", -m, 0.0, ok=m > 0, min_scaled_det=mins)


def grid_check(scenario, n=256, lo=(-2.0, -2.0), hi=(2.0, 2.0)):
    res = grid_injectivity(Extension(scenario), lo, hi, n)
    return _result("grid_injectivity", res["flips"] + res["boundary_crossings"], 0, **res)


def global_continuity(scenario, n=2000, eps=1e-11):
    """Two-sided jumps of E across every interface (relative to |E|)."""
    E = Extension(scenario, cells=pointwise_cells(scenario))
    th = np.linspace(-np.pi, np.pi, n)
    lb = E._inner(th)[0]
    worst = 0.0
    rings = [np.exp(lb), np.full(n, np.exp(E.lam_mid)), np.full(n, E.R0), np.full(n, E.rho_c),
             np.full(n, E.rho0)]
    for r in rings:
        a = E(np.stack([r * (1 - eps) * np.cos(th), r * (1 - eps) * np.sin(th)], -1))
        b = E(np.stack([r * (1 + eps) * np.cos(th), r * (1 + eps) * np.sin(th)], -1))
        worst = max(worst, float(np.max(np.hypot(*(a - b).T) / np.maximum(np.hypot(*b.T), 1e-300))))
    return _result("global_continuity", worst, 1e-8)


def structural_suite(scenario=None, grid_n=256):
    scenario = scenario or Scenario()
    return [
        boundary_compatibility(scenario),
        dyadic_interfaces(scenario),
        trapezoid_interfaces(scenario.degree),
        jacobian_agreement(scenario.degree),
        positive_jacobian(scenario.degree),
        grid_check(scenario, grid_n),
        global_continuity(scenario),
    ]

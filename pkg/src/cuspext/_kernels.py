"""Hot inner loops, compiled with numba when available.

Set CUSPEXT_DISABLE_NUMBA=1 to force the pure-numpy / pure-python fallbacks.
Both paths are exercised by the test-suite and compared in benchmarks/.
"""
import heapq
import math
import os

import numpy as np

_flag = os.environ.get("CUSPEXT_DISABLE_NUMBA", "").strip().lower()
USE_NUMBA = _flag not in ("1", "true", "yes", "on")

try:
    from numba import njit
except ImportError:  # pragma: no cover
    njit = None
    USE_NUMBA = False


# ---------------------------------------------------------------- 2x2 SVD

def _sv2_numpy(a, b, c, d):
    # closed form singular values of [[a, b], [c, d]]
    e = 0.5 * (a + d)
    f = 0.5 * (a - d)
    g = 0.5 * (c + b)
    h = 0.5 * (c - b)
    smax = np.hypot(e, h) + np.hypot(f, g)
    # q - r cancels; q^2 - r^2 = ad - bc does not. Scaled by the largest entry against overflow
    m = np.maximum(np.maximum(np.abs(a), np.abs(b)), np.maximum(np.abs(c), np.abs(d)))
    with np.errstate(divide="ignore", invalid="ignore"):
        det_s = (a / m) * (d / m) - (b / m) * (c / m)
        smin = np.where(smax > 0, np.abs(det_s) * (m / smax) * m, 0.0)
    return smax, smin


def _sv2_loop(a, b, c, d, smax, smin):
    for i in range(a.size):
        e = 0.5 * (a[i] + d[i])
        f = 0.5 * (a[i] - d[i])
        g = 0.5 * (c[i] + b[i])
        h = 0.5 * (c[i] - b[i])
        sm = math.hypot(e, h) + math.hypot(f, g)
        smax[i] = sm
        m = max(abs(a[i]), abs(b[i]), abs(c[i]), abs(d[i]))
        if sm > 0:
            det_s = (a[i] / m) * (d[i] / m) - (b[i] / m) * (c[i] / m)
            smin[i] = abs(det_s) * (m / sm) * m
        else:
            smin[i] = 0.0


# ------------------------------------------------- power-profile eta inverse

def _eta_inv_power_numpy(s, r):
    # solve U^2 + U^(2s) = r^4 for U >= 0; Newton from U0 = r^2 is monotone
    r = np.asarray(r, dtype=float)
    target = r ** 4
    u = r * r
    for _ in range(100):
        g = u * u + u ** (2 * s) - target
        dg = 2 * u + 2 * s * u ** (2 * s - 1)
        with np.errstate(divide="ignore", invalid="ignore"):
            step = np.where(dg > 0, g / dg, 0.0)
        u = np.maximum(u - step, 0.0)
        if np.all(np.abs(step) <= 4e-16 * np.maximum(u, 1e-300)):
            break
    return u


def _eta_inv_power_loop(s, r, out):
    for i in range(r.size):
        ri = r[i]
        if ri <= 0.0:
            out[i] = 0.0
            continue
        target = ri ** 4
        u = ri * ri
        for _ in range(100):
            g = u * u + u ** (2 * s) - target
            dg = 2 * u + 2 * s * u ** (2 * s - 1)
            step = g / dg
            u = u - step
            if u < 0.0:
                u = 0.0
            if abs(step) <= 4e-16 * u:
                break
        out[i] = u


# ------------------------------------------------------------ fast marching

def _fmm_update(t, state, cost, i, j, hx, hy, periodic_y):
    nx, ny = t.shape
    inf = math.inf
    a = inf
    if i > 0 and state[i - 1, j] == 2:
        a = t[i - 1, j]
    if i < nx - 1 and state[i + 1, j] == 2:
        a = min(a, t[i + 1, j])
    b = inf
    jm = j - 1
    jp = j + 1
    if periodic_y:
        jm = jm % ny
        jp = jp % ny
    if jm >= 0 and state[i, jm] == 2:
        b = t[i, jm]
    if jp < ny and state[i, jp] == 2:
        b = min(b, t[i, jp])
    f = cost[i, j]
    if a == inf and b == inf:
        return inf
    if a == inf:
        return b + f * hy
    if b == inf:
        return a + f * hx
    # two-sided quadratic ((T-a)/hx)^2 + ((T-b)/hy)^2 = f^2
    wa = 1.0 / (hx * hx)
    wb = 1.0 / (hy * hy)
    qa = wa + wb
    qb = -2.0 * (a * wa + b * wb)
    qc = a * a * wa + b * b * wb - f * f
    disc = qb * qb - 4.0 * qa * qc
    if disc < 0.0:
        return min(a + f * hx, b + f * hy)
    tv = (-qb + math.sqrt(disc)) / (2.0 * qa)
    if tv < max(a, b):
        return min(a + f * hx, b + f * hy)
    return tv


def _make_fmm(update):
    # the loop is built around a given update so numba can compile both together

    def fmm(cost, t0, known, hx, hy, periodic_y, out):
        nx, ny = cost.shape
        state = np.zeros((nx, ny), dtype=np.int8)  # 0 far, 1 trial, 2 known
        for i in range(nx):
            for j in range(ny):
                out[i, j] = t0[i, j]
                if known[i, j]:
                    state[i, j] = 2
        heap = [(0.0, 0, 0)]
        heap.pop()
        di = (1, -1, 0, 0)
        dj = (0, 0, 1, -1)
        for i in range(nx):
            for j in range(ny):
                if state[i, j] != 2:
                    continue
                for k in range(4):
                    ii = i + di[k]
                    jj = j + dj[k]
                    if periodic_y:
                        jj = jj % ny
                    if ii < 0 or ii >= nx or jj < 0 or jj >= ny:
                        continue
                    if state[ii, jj] == 0:
                        state[ii, jj] = 1
                        tv = update(out, state, cost, ii, jj, hx, hy, periodic_y)
                        out[ii, jj] = tv
                        heapq.heappush(heap, (tv, ii, jj))
        while len(heap) > 0:
            tv, i, j = heapq.heappop(heap)
            if state[i, j] == 2 or tv > out[i, j]:
                continue
            state[i, j] = 2
            for k in range(4):
                ii = i + di[k]
                jj = j + dj[k]
                if periodic_y:
                    jj = jj % ny
                if ii < 0 or ii >= nx or jj < 0 or jj >= ny:
                    continue
                if state[ii, jj] == 2:
                    continue
                nv = update(out, state, cost, ii, jj, hx, hy, periodic_y)
                if nv < out[ii, jj]:
                    out[ii, jj] = nv
                    state[ii, jj] = 1
                    heapq.heappush(heap, (nv, ii, jj))

    return fmm


_fmm_py = _make_fmm(_fmm_update)

if USE_NUMBA:
    _sv2_loop_jit = njit(cache=True)(_sv2_loop)
    _eta_inv_power_jit = njit(cache=True)(_eta_inv_power_loop)
    _fmm_jit = njit(_make_fmm(njit(_fmm_update)))


def sv2(a, b, c, d, backend=None):
    """Largest and smallest singular values of [[a, b], [c, d]] (broadcast)."""
    a, b, c, d = np.broadcast_arrays(*(np.asarray(v, dtype=float) for v in (a, b, c, d)))
    if _pick(backend) == "numba":
        shape = a.shape
        smax = np.empty(a.size)
        smin = np.empty(a.size)
        _sv2_loop_jit(a.ravel(), b.ravel(), c.ravel(), d.ravel(), smax, smin)
        return smax.reshape(shape), smin.reshape(shape)
    return _sv2_numpy(a, b, c, d)


def eta_inv_power(s, r, backend=None):
    """Inverse of eta(U) = sqrt(U) (1 + U^(2(s-1)))^(1/4) on U >= 0."""
    r = np.asarray(r, dtype=float)
    if _pick(backend) == "numba":
        flat = np.ascontiguousarray(r.ravel())
        out = np.empty(flat.size)
        _eta_inv_power_jit(float(s), flat, out)
        return out.reshape(r.shape)
    return _eta_inv_power_numpy(float(s), r)


def fast_march(cost, t0, known, hx, hy, periodic_y=False, backend=None):
    """Arrival times of the eikonal equation |grad T| = cost from a seed band."""
    cost = np.ascontiguousarray(cost, dtype=float)
    t0 = np.ascontiguousarray(t0, dtype=float)
    known = np.ascontiguousarray(known, dtype=np.bool_)
    out = np.empty_like(cost)
    if _pick(backend) == "numba":
        _fmm_jit(cost, t0, known, float(hx), float(hy), bool(periodic_y), out)
    else:
        _fmm_py(cost, t0, known, float(hx), float(hy), bool(periodic_y), out)
    return out


def _pick(backend):
    if backend is None:
        return "numba" if USE_NUMBA else "numpy"
    if backend == "numba" and not USE_NUMBA:
        raise RuntimeError("numba backend requested but disabled")
    return backend

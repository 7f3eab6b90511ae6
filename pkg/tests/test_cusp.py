import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from conftest import cusp_arc_points
from cuspext import CellMap, DyadicCells, E1_eval, F_t, F_t_inv, cell, eta, eta_inverse, eta_prime
from cuspext import linalg2 as la
from cuspext.analysis import jacobian_fd
from cuspext.cusp import (Df1, Df3, Df4_simple, ell_of_r, f1, f1_inv, f2, f2_inv, f3, f3_inv,
                          f4_simple, f4_simple_inv, simple_composite)
from cuspext.geometry import square
from cuspext.profiles import PowerProfile


def cell_points(cs, n, rng, margin=1e-3):
    """Random interior points of Q_t via rectangle coordinates."""
    x = cs.L1 + cs.sigma * rng.uniform(margin, 1 - margin, n)
    y = cs.sigma * (rng.uniform(margin, 1 - margin, n) - 0.5)
    return CellMap(cs).from_rect(x, y)


def test_eta_values():
    for s in (1.25, 1.5, 3.0):
        assert eta(s, 1.0) == pytest.approx(2 ** 0.25, rel=1e-15)
    assert eta(1.5, 1 / 256) == pytest.approx((1 / 16) * (257 / 256) ** 0.25, rel=1e-15)
    assert eta(1.5, 0.0) == 0
    with pytest.raises(ValueError):
        eta(1.5, -0.1)


def test_eta_prime():
    assert eta_prime(1.5, 1.0) == pytest.approx(5 * 2 ** 0.25 / 8, rel=1e-14)
    h = 1e-6
    fd = (eta(2.0, 0.25 + h) - eta(2.0, 0.25 - h)) / (2 * h)
    assert eta_prime(2.0, 0.25) == pytest.approx(fd, rel=1e-7)
    x = np.geomspace(1e-10, 1, 200)
    assert np.all(eta_prime(1.5, x) > 0)
    with pytest.raises(ValueError):
        eta_prime(1.5, 0.0)


@settings(max_examples=50, deadline=None)
@given(s=st.sampled_from([1.25, 1.5, 2.0, 3.0]), x=st.floats(1e-9, 1.0))
def test_eta_inverse_round_trip(s, x):
    assert eta_inverse(s, eta(s, x)) == pytest.approx(x, rel=1e-12)


def test_eta_inverse_values():
    assert eta_inverse(1.5, 0.0) == 0
    assert eta_inverse(1.5, 2 ** 0.25) == pytest.approx(1.0, rel=1e-14)
    r = np.random.default_rng(5).uniform(0, 1.1, 100)
    x = eta_inverse(1.5, r)
    assert np.all(np.abs(eta(1.5, x) - r) <= 1e-14 * np.maximum(1, r))


def test_cell_geometry():
    cs = cell(1 / 8, 1.5)
    assert cs.L1 == eta(1.5, 1 / 256) and cs.L2 == eta(1.5, 1 / 64)
    assert 0 < cs.L1 < cs.L2 and cs.sigma == pytest.approx(cs.L2 - cs.L1)
    for j in range(6, 15):
        t = 2.0 ** -j
        cs = cell(t, 1.5)
        assert 0.9 <= cs.L2 / t <= 1.1
        assert 0.4 <= cs.sigma / t <= 0.6
        assert cs.alpha == pytest.approx(t * t - t * t / 4)
        assert cs.beta == pytest.approx(2 * t ** 3, rel=1e-14)
    with pytest.raises(ValueError):
        cell(0.2)
    with pytest.raises(ValueError):
        cell(0.0)


def test_f1_and_inverse(rng):
    assert np.allclose(f1(1.0, np.pi / 2), [0, 1])
    assert np.allclose(f1(0.0, 2.3), [0, 0])
    x, y = rng.uniform(0.1, 2, 100), rng.uniform(0, 2 * np.pi, 100)
    assert np.allclose(la.det(Df1(x, y)), x, rtol=1e-12, atol=0)
    assert np.allclose(f1_inv(0.0, 1.0), [1, np.pi / 2])
    assert np.allclose(f1_inv(-1.0, 0.0), [1, np.pi])
    cs = cell(2.0 ** -7)
    z = cell_points(cs, 100, rng)
    r, th = f1_inv(z[:, 0], z[:, 1])
    assert np.allclose(np.stack(f1(r, th), -1), z, atol=1e-13 * cs.L2, rtol=0)
    with pytest.raises(ValueError):
        f1_inv(0.0, 0.0)


def test_ell_of_r():
    t = 2.0 ** -6
    cs = cell(t)
    assert ell_of_r(cs, cs.L2)[0] == pytest.approx(np.pi + np.arctan(t), rel=1e-14)
    assert ell_of_r(cs, cs.L1)[0] == pytest.approx(np.pi + np.arctan(t / 2), rel=1e-14)
    r = np.linspace(cs.L1, cs.L2, 500)
    ell, dell = ell_of_r(cs, r)
    assert np.all((ell > np.pi) & (ell <= np.pi + np.pi / 4)) and np.all(dell > 0)
    assert np.all(np.diff(ell) > 0)
    with pytest.raises(ValueError):
        ell_of_r(cs, cs.L2 * 1.01)


def test_f2(rng):
    cs = cell(2.0 ** -8)
    r = np.linspace(cs.L1, cs.L2, 50)
    ell, _ = ell_of_r(cs, r)
    assert np.allclose(f2(cs, r, np.pi)[1], 0)
    assert np.allclose(f2(cs, r, np.pi - ell / 2)[1], cs.sigma / 2, rtol=1e-14)
    th = np.pi + rng.uniform(-0.5, 0.5, 50) * ell
    x, y = f2(cs, r, th)
    r2, th2 = f2_inv(cs, x, y)
    assert np.allclose(r2, r, rtol=1e-14) and np.allclose(th2, th, rtol=1e-12)
    with pytest.raises(ValueError):
        f2(cs, r, np.pi - ell)


def test_f3(rng):
    t = 2.0 ** -7
    cs = cell(t)
    assert np.allclose(f3(cs, -t * t, t ** 3), [t * t, t ** 3], rtol=1e-14)
    assert np.allclose(f3(cs, -t * t / 4, 0.0), [t * t / 4, 0])
    u = -rng.uniform(t * t / 4, t * t, 100)
    v = (-u) ** 1.5 * rng.uniform(-1, 1, 100)
    D = Df3(cs, u, v)
    assert np.all(la.det(D) < 0)
    assert np.allclose(la.det(D), -t ** 3 / (-u) ** 1.5, rtol=1e-12)
    for k in range(100):
        p = np.array([u[k], v[k]])
        fd = jacobian_fd(lambda q: np.stack(f3(cs, q[..., 0], q[..., 1]), -1), p, h=1e-4 * t * t,
                         richardson=True)
        assert np.max(np.abs(fd - D[k])) <= 1e-7 * np.max(np.abs(D[k]))
    U, V = f3(cs, u, v)
    assert np.allclose(np.stack(f3_inv(cs, U, V), -1), np.stack([u, v], -1), rtol=1e-13)
    with pytest.raises(ValueError):
        f3(cs, 0.0, 0.0)


def test_f4_simple():
    t = 2.0 ** -6
    cs = cell(t)
    assert np.allclose(f4_simple(cs, t * t / 4, -t ** 3), [cs.L1, -cs.sigma / 2], rtol=1e-14)
    assert np.allclose(f4_simple(cs, t * t, t ** 3), [cs.L2, cs.sigma / 2], rtol=1e-14)
    x, y = f4_simple_inv(cs, *f4_simple(cs, 0.7 * t * t, 0.2 * t ** 3))
    assert x == pytest.approx(0.7 * t * t, rel=1e-13) and y == pytest.approx(0.2 * t ** 3, rel=1e-13)


def test_f4_distortion_scaling():
    for j in range(6, 13):
        t = 2.0 ** -j
        cs = cell(t)
        u = np.linspace(t * t / 4, t * t, 21)[1:-1]
        D = Df4_simple(cs, u, 0 * u)
        assert np.all(la.det(D) > 0)
        K = la.distortion(D) * t ** (2 * 1.5 - 2)
        assert np.all((K >= 0.05) & (K <= 20))


def test_F_t_examples():
    for j in (6, 9, 12):
        t = 2.0 ** -j
        cs = cell(t)
        assert np.allclose(F_t(np.array([-cs.L2, 0.0]), t), [-t * t, 0], rtol=1e-12, atol=0)
        U = np.linspace(t * t / 4, t * t, 41)
        for sgn in (1, -1):
            z = cusp_arc_points(cs.profile, U, sgn)
            w = F_t(z, t)
            assert np.allclose(w, np.stack([-U, sgn * U ** 1.5], -1), rtol=0, atol=1e-9 * t * t)
            assert np.allclose(w, square(z), rtol=0, atol=1e-9 * t * t)


@pytest.mark.parametrize("s", [1.25, 1.5, 2.0, 3.0])
def test_F_t_orientation(s, rng):
    for j in range(6, 15):
        cs = cell(2.0 ** -j, s)
        z = cell_points(cs, 10000 if j == 6 else 1000, rng)
        assert np.all(la.det(CellMap(cs).DF(z)) > 0)


def test_F_t_round_trip(rng):
    t = 2.0 ** -9
    cs = cell(t)
    z = cell_points(cs, 200, rng)
    back = F_t_inv(F_t(z, t), t)
    assert np.allclose(back, z, rtol=0, atol=1e-12 * cs.L2)


def test_F_t_jacobian_matches_fd(rng):
    for j in (6, 10, 14):
        cs = cell(2.0 ** -j)
        cm = CellMap(cs)
        z = cell_points(cs, 100, rng, margin=0.05)
        D = cm.DF(z)
        for k in range(len(z)):
            fd = jacobian_fd(cm.F, z[k], h=1e-4 * cs.sigma, richardson=True)
            assert np.max(np.abs(fd - D[k])) <= 1e-6 * np.max(np.abs(D[k]))


def test_F_t_injective_on_grid():
    from cuspext import grid_injectivity
    cs = cell(2.0 ** -8)
    cm = CellMap(cs)

    def on_rect(p):
        # rectangle coordinates reverse orientation, so flip y to sample Q_t positively
        x = cs.L1 + cs.sigma * p[..., 0]
        y = cs.sigma * (0.5 - p[..., 1])
        return cm.F(cm.from_rect(x, y))

    rep = grid_injectivity(on_rect, (0, 0), (1, 1), 64)
    assert rep["ok"], rep


def test_simple_composite_is_t_independent(rng):
    prof = PowerProfile(1.5)
    for j in (6, 11):
        cs = cell(2.0 ** -j)
        z = cell_points(cs, 50, rng)
        assert np.allclose(simple_composite(prof, z), CellMap(cs).F(z), rtol=1e-12, atol=0)


def test_E1_dispatch_and_interfaces():
    prof = PowerProfile(1.5)
    cells = DyadicCells(prof, 6)
    for j in range(6, 14):
        cs = cell(2.0 ** -j)
        mid = 0.5 * (cs.L1 + cs.L2)
        assert cells.index(mid) == j
        th = np.pi + np.linspace(-0.5, 0.5, 51) * ell_of_r(cs, cs.L1)[0] * 0.999
        z = np.stack([cs.L1 * np.cos(th), cs.L1 * np.sin(th)], -1)
        a = cells.cell_map(j).F(z)
        b = cells.cell_map(j + 1).F(z)
        assert np.max(np.hypot(*(a - b).T)) <= 1e-9 * cs.t ** 2
    U = np.geomspace(4.0 ** -14, 4.0 ** -6, 200)
    z = cusp_arc_points(prof, U)
    assert np.allclose(E1_eval(z), square(z), rtol=0, atol=1e-9 * 4.0 ** -6)
    with pytest.raises(ValueError):
        E1_eval(np.array([[0.5, 0.0]]))

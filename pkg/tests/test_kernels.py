import os
import subprocess
import sys

import numpy as np
import pytest

from cuspext import _kernels
from cuspext.profiles import PowerProfile

needs_numba = pytest.mark.skipif(not _kernels.USE_NUMBA, reason="numba disabled")


def test_sv2_numpy_matches_svd(rng):
    a, b, c, d = rng.normal(size=(4, 500))
    smax, smin = _kernels.sv2(a, b, c, d, backend="numpy")
    sv = np.linalg.svd(np.stack([np.stack([a, b], -1), np.stack([c, d], -1)], -2), compute_uv=False)
    assert np.allclose(smax, sv[:, 0], rtol=1e-12) and np.allclose(smin, sv[:, 1], rtol=1e-9, atol=1e-14)


def test_sv2_tiny_and_singular():
    smax, smin = _kernels.sv2(1e-200, 0.0, 0.0, 1e-200, backend="numpy")
    assert smax == pytest.approx(1e-200) and smin == pytest.approx(1e-200)
    smax, smin = _kernels.sv2(1.0, 2.0, 2.0, 4.0, backend="numpy")
    assert smax == pytest.approx(5.0) and abs(smin) <= 1e-15


@needs_numba
def test_sv2_backends_agree(rng):
    a, b, c, d = rng.normal(size=(4, 3, 700)) * np.exp(rng.uniform(-20, 20, (4, 3, 700)))
    m = _kernels.sv2(a, b, c, d, backend="numba")
    n = _kernels.sv2(a, b, c, d, backend="numpy")
    assert m[0].shape == (3, 700)
    assert np.allclose(m[0], n[0], rtol=1e-13) and np.allclose(m[1], n[1], rtol=1e-13, atol=0)


def test_sv2_small_singular_value_relative_accuracy():
    # [[1, 1], [1, 1 + e]] has smin ~ e/2; exact product with smax recovers det
    e = 10.0 ** -np.arange(1, 12)
    smax, smin = _kernels.sv2(1.0, 1.0, 1.0, 1 + e, backend="numpy")
    assert np.allclose(smin * smax, np.abs(1 + e - 1), rtol=1e-14)
    big = _kernels.sv2(1e200, 0.0, 0.0, 1e190, backend="numpy")
    assert big[0] == pytest.approx(1e200) and big[1] == pytest.approx(1e190)


@pytest.mark.parametrize("backend", ["numpy", pytest.param("numba", marks=needs_numba)])
@pytest.mark.parametrize("s", [1.25, 1.5, 3.0])
def test_eta_inv_power(backend, s, rng):
    U = np.concatenate([[0.0], np.geomspace(1e-30, 1.0, 300), rng.uniform(0, 1, 100)])
    r = PowerProfile(s).eta(U)
    back = _kernels.eta_inv_power(s, r, backend=backend)
    assert np.allclose(back, U, rtol=1e-13, atol=0)


@needs_numba
def test_eta_inv_backends_agree(rng):
    r = rng.uniform(0, 1.3, (20, 50))
    assert np.allclose(_kernels.eta_inv_power(1.5, r, backend="numba"),
                       _kernels.eta_inv_power(1.5, r, backend="numpy"), rtol=1e-14, atol=0)


def _plane_wave(n=48):
    # seed column at x = 0, uniform cost: T = x exactly (first-order scheme is exact on axes)
    cost = np.ones((n, 2 * n))
    t0 = np.full(cost.shape, np.inf)
    known = np.zeros(cost.shape, bool)
    known[0] = True
    t0[0] = 0.0
    return cost, t0, known


@pytest.mark.parametrize("backend", ["numpy", pytest.param("numba", marks=needs_numba)])
def test_fast_march_plane_wave(backend):
    cost, t0, known = _plane_wave()
    T = _kernels.fast_march(cost, t0, known, 0.5, 0.25, periodic_y=True, backend=backend)
    assert np.allclose(T, 0.5 * np.arange(48)[:, None] * np.ones((1, 96)), rtol=0, atol=1e-12)


@pytest.mark.parametrize("backend", ["numpy", pytest.param("numba", marks=needs_numba)])
def test_fast_march_point_source(backend):
    n = 81
    cost = np.full((n, n), 2.0)
    t0 = np.full((n, n), np.inf)
    known = np.zeros((n, n), bool)
    X, Y = np.meshgrid(np.arange(n) - 40, np.arange(n) - 40, indexing="ij")
    R = np.hypot(X, Y) * 0.1
    ring = R <= 0.3
    known[ring] = True
    t0[ring] = 2 * R[ring]
    T = _kernels.fast_march(cost, t0, known, 0.1, 0.1, backend=backend)
    # first-order scheme: O(h log) error, overestimates the distance
    assert np.all(T >= 2 * R - 1e-12)
    assert np.max(np.abs(T - 2 * R)) <= 0.1 * 2 * R.max()


@needs_numba
def test_fast_march_backends_agree(rng):
    cost = rng.uniform(0.5, 2.0, (40, 64))
    t0 = np.full(cost.shape, np.inf)
    known = np.zeros(cost.shape, bool)
    known[20, 10:14] = True
    t0[20, 10:14] = 0.0
    a = _kernels.fast_march(cost, t0, known, 0.1, 0.2, True, backend="numba")
    b = _kernels.fast_march(cost, t0, known, 0.1, 0.2, True, backend="numpy")
    assert np.allclose(a, b, rtol=1e-13, atol=0)


def test_disable_numba_env():
    code = "from cuspext import _kernels; print(_kernels.USE_NUMBA); _kernels.sv2(1.0, 0.0, 0.0, 1.0)"
    env = dict(os.environ, CUSPEXT_DISABLE_NUMBA="1")
    out = subprocess.run([sys.executable, "-c", code], env=env, capture_output=True, text=True, check=True)
    assert out.stdout.strip() == "False"
    code = ("from cuspext import _kernels\ntry:\n    _kernels.sv2(1.0, 0.0, 0.0, 1.0, backend='numba')\n"
            "except RuntimeError:\n    print('refused')")
    out = subprocess.run([sys.executable, "-c", code], env=env, capture_output=True, text=True, check=True)
    assert out.stdout.strip() == "refused"


def test_benchmark_script_runs():
    bench = os.path.join(os.path.dirname(__file__), os.pardir, "benchmarks", "bench_kernels.py")
    env = dict(os.environ, CUSPEXT_DISABLE_NUMBA="1")
    out = subprocess.run([sys.executable, bench, "--repeat", "1"], env=env, capture_output=True, text=True,
                         check=True, timeout=600)
    assert "sv2" in out.stdout

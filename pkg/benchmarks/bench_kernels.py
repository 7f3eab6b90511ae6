"""Numba vs pure-numpy timings for the three hot kernels.

    python3 benchmarks/bench_kernels.py [--repeat 5]

Numba timings exclude the first (compiling) call. With CUSPEXT_DISABLE_NUMBA=1
only the numpy column is produced.
"""
import argparse
import time

import numpy as np

from cuspext import _kernels


def best_of(fn, repeat):
    ts = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        ts.append(time.perf_counter() - t0)
    return min(ts)


def cases():
    rng = np.random.default_rng(0)
    a, b, c, d = rng.normal(size=(4, 1_000_000))
    r = rng.uniform(1e-4, 1.2, 200_000)
    n = 192
    cost = np.ones((n, 4 * n))
    t0 = np.full(cost.shape, np.inf)
    known = np.zeros(cost.shape, bool)
    known[:, 0] = True
    t0[:, 0] = 0.0
    return {
        "sv2 (1e6 matrices)": lambda be: _kernels.sv2(a, b, c, d, backend=be),
        "eta_inv_power (2e5)": lambda be: _kernels.eta_inv_power(1.5, r, backend=be),
        f"fast_march ({n}x{4 * n})": lambda be: _kernels.fast_march(cost, t0, known, 1.0, 1.0, True, backend=be),
    }


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--repeat", type=int, default=5)
    a = ap.parse_args()
    backends = ["numpy"] + (["numba"] if _kernels.USE_NUMBA else [])
    print(f"{'kernel':28s}" + "".join(f"{b:>12s}" for b in backends) + ("     speedup" if len(backends) == 2 else ""))
    for name, fn in cases().items():
        row = {}
        for be in backends:
            if be == "numba":
                fn(be)  # compile
            # the pure-python fast march is slow; one run is enough to compare
            rep = 1 if (be == "numpy" and name.startswith("fast_march")) else a.repeat
            row[be] = best_of(lambda: fn(be), rep)
        # both paths must agree before timings mean anything
        if len(backends) == 2:
            x, y = fn("numpy"), fn("numba")
            x = np.concatenate([np.ravel(v) for v in (x if isinstance(x, tuple) else (x,))])
            y = np.concatenate([np.ravel(v) for v in (y if isinstance(y, tuple) else (y,))])
            assert np.allclose(x, y, rtol=1e-12, atol=1e-12), name
        line = f"{name:28s}" + "".join(f"{row[b] * 1e3:10.2f}ms" for b in backends)
        if len(backends) == 2:
            line += f"{row['numpy'] / row['numba']:11.1f}x"
        print(line)


if __name__ == "__main__":
    main()

"""Throughput of the compiled and pure-Python latent-integral backends.

Usage: python benchmarks/bench_quadrature.py [--cells N] [--repeat R]
"""

import argparse
import time

import numpy as np

from bgmoe import _quadrature as quad


def cells(n, seed=0):
    rng = np.random.default_rng(seed)
    return (
        rng.gamma(2.0, 2.0, n),
        rng.gamma(2.0, 2.0, n),
        *rng.uniform(0.2, 6.0, (3, n)),
        rng.uniform(0.3, 3.0, n),
    )


def best_time(backend, args, repeat):
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        out, _ = quad.integrate_cells(*args, backend=backend)
        times.append(time.perf_counter() - t0)
    return min(times), out


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--cells", type=int, default=20_000)
    ap.add_argument("--repeat", type=int, default=3)
    opts = ap.parse_args()
    args = cells(opts.cells)
    backends = ["python"] + (["cython"] if quad._kernels is not None else [])
    results = {}
    print(f"{'backend':<8} {'seconds':>9} {'cells/s':>12}")
    for b in backends:
        t, out = best_time(b, args, opts.repeat)
        results[b] = (t, out)
        print(f"{b:<8} {t:9.3f} {opts.cells / t:12.0f}")
    if len(results) == 2:
        diff = np.max(np.abs(results["cython"][1][:, : quad.ERR] - results["python"][1][:, : quad.ERR]))
        print(f"speed-up {results['python'][0] / results['cython'][0]:.2f}x, max abs difference {diff:.2e}")


if __name__ == "__main__":
    main()

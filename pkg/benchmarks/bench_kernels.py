"""Benchmark the compiled kernel core against the numpy fallback.

Run:  python3 benchmarks/bench_kernels.py [--sizes 1024,4096]

Times the contour-velocity boundary integral (the O(n^2) hot loop of
the patch runs) and the Hermite-bicubic sampler (the hot loop of long
particle runs) on both backends and prints the speedups.
"""

import argparse
import time

import numpy as np

from twistlab._core import npkernels

try:
    from twistlab._core import cykernels
except ImportError:
    cykernels = None


def time_call(fn, *args, repeats=3):
    best = np.inf
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn(*args)
        best = min(best, time.perf_counter() - t0)
    return best


def bench_contour(n):
    th = np.linspace(0.0, 2 * np.pi, n + 1)[:-1]
    vx, vy = 5 * np.cos(th), 5 * np.sin(th)
    ls, ll = np.array([0]), np.array([n])
    nq = min(n, 2048)
    qx, qy = vx[:nq].copy(), vy[:nq].copy()
    pairs = nq * n
    rows = []
    t_np = time_call(npkernels.contour_velocity, qx, qy, vx, vy, ls, ll, 1.0)
    rows.append(("numpy", t_np, 1e9 * t_np / pairs))
    if cykernels is not None:
        t_cy = time_call(cykernels.contour_velocity, qx, qy, vx, vy, ls, ll, 1.0)
        rows.append(("cython", t_cy, 1e9 * t_cy / pairs))
        a = npkernels.contour_velocity(qx[:64], qy[:64], vx, vy, ls, ll, 1.0)
        b = cykernels.contour_velocity(qx[:64], qy[:64], vx, vy, ls, ll, 1.0)
        assert np.allclose(a[0], b[0], atol=1e-12), "backends disagree"
    return pairs, rows


def bench_hermite(n):
    ny = nx = 256
    rng = np.random.default_rng(0)
    u = rng.standard_normal((ny, nx))
    qx = rng.uniform(0, 2 * np.pi, n)
    qy = rng.uniform(0, 2 * np.pi, n)
    args = (u, u, u, u, 0.0, 0.0, 2 * np.pi / nx, 2 * np.pi / ny, qx, qy)
    rows = [("numpy", time_call(npkernels.hermite_bicubic, *args), None)]
    if cykernels is not None:
        rows.append(("cython", time_call(cykernels.hermite_bicubic, *args),
                     None))
    for i, (name, t, _) in enumerate(rows):
        rows[i] = (name, t, 1e9 * t / n)
    return n, rows


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--sizes", default="1024,4096,8192")
    args = ap.parse_args()
    sizes = [int(s) for s in args.sizes.split(",")]

    if cykernels is None:
        print("# compiled extension not built: numpy only")

    print("== contour velocity (boundary integral) ==")
    for n in sizes:
        pairs, rows = bench_contour(n)
        base = rows[0][1]
        for name, t, per in rows:
            speedup = f"  x{base / t:.1f}" if name != "numpy" else ""
            print(f"  n={n:6d} ({pairs:>10d} pairs)  {name:6s} "
                  f"{t * 1e3:8.1f} ms  {per:6.1f} ns/pair{speedup}")

    print("== hermite bicubic sampling ==")
    for n in (10 ** 5, 10 ** 6):
        n_, rows = bench_hermite(n)
        base = rows[0][1]
        for name, t, per in rows:
            speedup = f"  x{base / t:.1f}" if name != "numpy" else ""
            print(f"  n={n_:7d} evals          {name:6s} "
                  f"{t * 1e3:8.1f} ms  {per:6.1f} ns/eval{speedup}")


if __name__ == "__main__":
    main()

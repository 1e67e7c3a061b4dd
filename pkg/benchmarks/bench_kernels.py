"""Time the numba kernels against the numpy fallbacks.

    python3 benchmarks/bench_kernels.py [--repeat 20] [--size 128]

Prints one line per kernel with the best time of each backend, the speedup
and the max abs difference of their outputs.
"""

import argparse
import time

import numpy as np

from nehari_lab.kernels import numba_impl, numpy_impl


def best_of(fn, args, repeat):
    fn(*args)  # warm-up (and numba compilation)
    best = np.inf
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn(*args)
        best = min(best, time.perf_counter() - t0)
    return best


def cases(n, rng):
    u1 = rng.standard_normal(n * n)
    u2 = rng.standard_normal((n, n))
    r = (np.arange(n) + 0.5) / n
    diag = 2.0 + 4.0 * rng.random(n)
    a_in = 1.0 + rng.random(n)
    a_out = 1.0 + rng.random(n)
    b = 1.0 / r**2
    nb = 2 * n
    lower = -np.ones((nb, n))
    upper = -np.ones((nb, n))
    tdiag = 4.0 + rng.random((nb, n))
    rhs = rng.standard_normal((nb, n))
    vals = np.geomspace(1e-2, 10.0, 24)
    X, Y = np.meshgrid(vals, vals, indexing="ij")
    table = X**4 / 4 + Y**4 / 4 - X**2 * Y**2
    return {
        "neg_lap_1d": (u1, 1.0 / n**2),
        "neg_lap_2d": (u2, float(n * n), float(n * n)),
        "neg_lap_polar": (u2, diag, a_in, a_out, b),
        "thomas_batched": (lower, tdiag, upper, rhs),
        "two_point_max_violation": (table,),
    }


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=20)
    ap.add_argument("--size", type=int, default=128)
    args = ap.parse_args()
    if numba_impl is None:
        raise SystemExit("numba is not importable; nothing to compare")
    rng = np.random.default_rng(0)
    print(f"{'kernel':26s} {'numpy [ms]':>11s} {'numba [ms]':>11s} {'speedup':>8s} {'max diff':>10s}")
    for name, fargs in cases(args.size, rng).items():
        f_np, f_nb = getattr(numpy_impl, name), getattr(numba_impl, name)
        t_np = best_of(f_np, fargs, args.repeat)
        t_nb = best_of(f_nb, fargs, args.repeat)
        diff = float(np.max(np.abs(np.asarray(f_np(*fargs)) - np.asarray(f_nb(*fargs)))))
        print(f"{name:26s} {1e3 * t_np:11.3f} {1e3 * t_nb:11.3f} {t_np / t_nb:8.1f} {diff:10.2e}")


if __name__ == "__main__":
    main()

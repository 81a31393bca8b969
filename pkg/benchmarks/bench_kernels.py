"""Time the numba kernels against their numpy fallbacks.

    python3 benchmarks/bench_kernels.py [--reps N] [--k K] [--grid G]

Both paths are called directly (``use_numba=True/False``), so the env flag
does not matter here. The first numba call is a warm-up and is not timed.
"""
import argparse
import time

import numpy as np

from modlab import kernels
from modlab._accel import HAVE_NUMBA


def best_of(fn, repeat=5):
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return min(times)


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--reps", type=int, default=100_000)
    ap.add_argument("--k", type=int, default=3)
    ap.add_argument("--d", type=int, default=64)
    ap.add_argument("--grid", type=int, default=201)
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args()

    if not HAVE_NUMBA:
        print("numba unavailable (or MODLAB_NO_NUMBA set); nothing to compare")
        return

    rng = np.random.default_rng(0)
    x = rng.standard_normal((args.reps, args.k, args.d)) / np.sqrt(args.d)
    a = np.einsum("nid,njd->nij", x, x)
    v = np.sqrt(2.0 * rng.standard_exponential(args.reps))
    y = np.linspace(-5.0, 5.0, args.grid)

    kernels.gram_stats(a[:10], use_numba=True)
    ld, q, _ = kernels.gram_stats(a, use_numba=True)
    kernels.density_grid_moments(ld[:10], q[:10], v[:10], y, args.k, use_numba=True)

    cases = {
        f"gram_stats        n={args.reps} k={args.k}": lambda nb: kernels.gram_stats(a, use_numba=nb),
        f"density_grid      n={args.reps} grid={args.grid}": lambda nb: kernels.density_grid_moments(ld, q, v, y, args.k, use_numba=nb),
    }
    print(f"{'kernel':<44}{'numpy s':>10}{'numba s':>10}{'speedup':>9}")
    for name, fn in cases.items():
        t_np = best_of(lambda: fn(False), args.repeat)
        t_nb = best_of(lambda: fn(True), args.repeat)
        print(f"{name:<44}{t_np:>10.4f}{t_nb:>10.4f}{t_np / t_nb:>8.1f}x")

    l1, q1, f1 = kernels.gram_stats(a, use_numba=True)
    l2, q2, f2 = kernels.gram_stats(a, use_numba=False)
    print(f"max |logdet diff| {np.max(np.abs(l1 - l2)):.2e}, max |quad rel diff| {np.max(np.abs(q1 / q2 - 1)):.2e}")


if __name__ == "__main__":
    main()

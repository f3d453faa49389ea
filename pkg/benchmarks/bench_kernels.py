"""Time the numba kernels against their numpy twins.

Usage: python benchmarks/bench_kernels.py [--repeat N]

Both implementations are called directly, so the CACHESIM_DISABLE_NUMBA
flag does not matter here. The first numba call (compilation) is excluded.
"""

import argparse
import timeit

import numpy as np

from cachesim import kernels


def cases(rng):
    a = rng.uniform(0.1, 2.0, 1000)
    base = rng.uniform(0, 1, 1000)
    A = rng.uniform(0.1, 2.0, (2000, 20))
    B = rng.uniform(0, 1, (2000, 20))
    d = rng.integers(0, 100, (4096, 20))
    alloc = rng.uniform(0, 1, (20, 100))
    var = rng.uniform(0.7, 1.6, 100)
    n = 200_000
    beta = rng.integers(0, 6, n).astype(np.int64)
    keys = (rng.integers(0, 64, n) | (1 << beta)).astype(np.int64)
    P = rng.uniform(0, 1, (12, 12))
    g = np.zeros(100, dtype=bool)
    g[:40] = True
    q = rng.dirichlet(np.ones(100))
    c = 1 - (1 - q) ** 20
    trf = (q * var, c, g, 50.0, 40, 20, float(q[g].sum()), c[g].sum(), c[~g].sum(), 8.0,
           np.linspace(0, 2, 41), np.linspace(0, 1, 41))
    return {
        "waterfill (N=1000)": ("waterfill", (a, base, np.ones(1000), 30.0)),
        "waterfill_batch (2000x20)": ("waterfill_batch", (A, B, np.ones_like(A), np.full(2000, 5.0))),
        "lcu distortions (4096 demands, K=20)": ("lcu_demand_distortions", (d, alloc, var, 8.0)),
        "label zip (200k vertices)": ("label_zip_colors", (keys, beta)),
        "subset max sum (12 receivers)": ("subset_max_sum", (P,)),
        "trf grid (41x41, N=100)": ("trf_grid", trf),
    }


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args()
    rng = np.random.default_rng(0)
    print(f"{'kernel':40s} {'numba ms':>10s} {'numpy ms':>10s} {'speedup':>8s}")
    for label, (name, argv) in cases(rng).items():
        nb = getattr(kernels, name + "_nb")
        npf = getattr(kernels, name + "_np")
        nb(*argv)  # compile
        t_nb = min(timeit.repeat(lambda: nb(*argv), number=1, repeat=args.repeat)) * 1e3
        t_np = min(timeit.repeat(lambda: npf(*argv), number=1, repeat=args.repeat)) * 1e3
        print(f"{label:40s} {t_nb:10.3f} {t_np:10.3f} {t_np / t_nb:8.1f}x")


if __name__ == "__main__":
    main()

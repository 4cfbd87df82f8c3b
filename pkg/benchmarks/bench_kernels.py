"""Timing comparison of the compiled kernels against the numpy fallback.

Runs every per-level kernel over all levels of a large trinomial lattice and
reports per-pass wall times.  Usage:

    python3 benchmarks/bench_kernels.py [--K 512] [--repeats 20]
"""

import argparse
import time

import numpy as np

from orthres import _kernels
from orthres.models import ModelConfig, build

NUMPY_IMPLS = {
    "backward_expect": _kernels._backward_expect_np,
    "level_moments_d1": _kernels._level_moments_d1_np,
    "edge_residuals_d1": _kernels._edge_residuals_d1_np,
    "weighted_child_sum": _kernels._weighted_child_sum_np,
}
FAST_IMPLS = {name: getattr(_kernels, f"_{name}_impl") for name in NUMPY_IMPLS}


def full_pass(fn, name, tree, y, m, w, scratch):
    for k in range(tree.K):
        lo, hi = tree.level_slice(k)
        n = hi - lo
        args = (tree.estart, tree.echild, tree.eprob)
        if name == "backward_expect":
            fn(*args, y, lo, hi, scratch[:n])
        elif name == "level_moments_d1":
            fn(*args, m, y, lo, hi, scratch[:n], scratch[n:2 * n],
               scratch[2 * n:3 * n])
        elif name == "edge_residuals_d1":
            fn(*args, m, y, scratch[:n], scratch[n:2 * n], lo, hi, w,
               scratch[2 * n:3 * n])
        else:
            fn(*args, w, y, lo, hi, scratch[:n])


def bench(K, repeats):
    tree = build(ModelConfig("trinomial", K=K)).tree
    rng = np.random.default_rng(0)
    y = rng.normal(size=tree.n_nodes)
    m = rng.normal(size=tree.n_nodes)
    w = rng.uniform(0.5, 1.5, size=len(tree.eprob))
    scratch = np.zeros(3 * tree.n_nodes)

    label = "numba" if _kernels.NUMBA_ENABLED else "python-loop"
    print(f"trinomial K={K}: {tree.n_nodes} nodes, {len(tree.eprob)} edges, "
          f"{repeats} passes per kernel")
    print(f"{'kernel':<20} {label + ' [ms]':>14} {'numpy [ms]':>12} "
          f"{'speedup':>8}")
    for name in sorted(NUMPY_IMPLS):
        times = {}
        for impl_name, fn in (("fast", FAST_IMPLS[name]),
                              ("numpy", NUMPY_IMPLS[name])):
            full_pass(fn, name, tree, y, m, w, scratch)  # warm-up / JIT
            t0 = time.perf_counter()
            for _ in range(repeats):
                full_pass(fn, name, tree, y, m, w, scratch)
            times[impl_name] = (time.perf_counter() - t0) / repeats * 1e3
        print(f"{name:<20} {times['fast']:>14.3f} {times['numpy']:>12.3f} "
              f"{times['numpy'] / times['fast']:>7.1f}x")


if __name__ == "__main__":
    ap = argparse.ArgumentParser()
    ap.add_argument("--K", type=int, default=512)
    ap.add_argument("--repeats", type=int, default=20)
    args = ap.parse_args()
    bench(args.K, args.repeats)

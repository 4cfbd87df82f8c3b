"""Parity checks between the compiled kernels and the numpy fallback.

Both implementations are importable regardless of the ORTHRES_DISABLE_NUMBA
flag, so the suite can compare them in-process.
"""

import numpy as np
import numpy.testing as npt
import pytest

from orthres import _kernels
from orthres._kernels import (NUMBA_ENABLED, _backward_expect_loop,
                              _backward_expect_np, _edge_residuals_d1_loop,
                              _edge_residuals_d1_np, _level_moments_d1_loop,
                              _level_moments_d1_np, _weighted_child_sum_loop,
                              _weighted_child_sum_np)
from orthres.models import ModelConfig, build

from conftest import random_full_tree

LOOP = {
    "backward_expect": _backward_expect_loop,
    "level_moments_d1": _level_moments_d1_loop,
    "edge_residuals_d1": _edge_residuals_d1_loop,
    "weighted_child_sum": _weighted_child_sum_loop,
}
NUMPY = {
    "backward_expect": _backward_expect_np,
    "level_moments_d1": _level_moments_d1_np,
    "edge_residuals_d1": _edge_residuals_d1_np,
    "weighted_child_sum": _weighted_child_sum_np,
}
COMPILED = {name: getattr(_kernels, f"_{name}_impl") for name in LOOP}


def cases(rng):
    yield build(ModelConfig("trinomial", K=12)).tree
    yield build(ModelConfig("compensated_jump", K=10)).tree
    for _ in range(4):
        yield random_full_tree(rng, K=4)


def run_kernel(fn, name, tree, rng):
    lo, hi = tree.level_slice(rng.integers(0, tree.K))
    args = (tree.estart, tree.echild, tree.eprob)
    y = rng.normal(size=tree.n_nodes)
    m = rng.normal(size=tree.n_nodes)
    if name == "backward_expect":
        out = np.empty(hi - lo)
        fn(*args, y, lo, hi, out)
        return (out,)
    if name == "level_moments_d1":
        ey, m1, s2 = (np.empty(hi - lo) for _ in range(3))
        fn(*args, m, y, lo, hi, ey, m1, s2)
        return ey, m1, s2
    if name == "edge_residuals_d1":
        # feed both candidates the same ey/z, from the numpy reference
        ey, m1, s2 = (np.empty(hi - lo) for _ in range(3))
        _level_moments_d1_np(*args, m, y, lo, hi, ey, m1, s2)
        z = m1 / np.maximum(s2, 1e-300)
        dn = np.zeros(len(tree.eprob))
        res = np.empty(hi - lo)
        fn(*args, m, y, ey, z, lo, hi, dn, res)
        return dn, res
    if name == "weighted_child_sum":
        w = rng.uniform(0.5, 1.5, size=len(tree.eprob))
        out = np.empty(hi - lo)
        fn(*args, w, y, lo, hi, out)
        return (out,)
    raise KeyError(name)


@pytest.mark.parametrize("name", sorted(LOOP))
def test_loop_matches_numpy(name, rng):
    for tree in cases(rng):
        seed = int(rng.integers(1 << 31))
        a = run_kernel(LOOP[name], name, tree, np.random.default_rng(seed))
        b = run_kernel(NUMPY[name], name, tree, np.random.default_rng(seed))
        for x, y in zip(a, b):
            npt.assert_allclose(x, y, atol=1e-13)


@pytest.mark.skipif(not NUMBA_ENABLED, reason="numba disabled or absent")
@pytest.mark.parametrize("name", sorted(LOOP))
def test_compiled_matches_numpy(name, rng):
    for tree in cases(rng):
        seed = int(rng.integers(1 << 31))
        a = run_kernel(COMPILED[name], name, tree, np.random.default_rng(seed))
        b = run_kernel(NUMPY[name], name, tree, np.random.default_rng(seed))
        for x, y in zip(a, b):
            npt.assert_allclose(x, y, atol=1e-13)


def test_wrappers_agree_with_direct_expectation(rng):
    tree = build(ModelConfig("binary", K=6)).tree
    vals = rng.normal(size=tree.n_nodes)
    lo, hi = tree.level_slice(3)
    out = _kernels.backward_expect(tree, vals, lo, hi)
    for i in range(lo, hi):
        e0, e1 = int(tree.estart[i]), int(tree.estart[i + 1])
        ref = float(tree.eprob[e0:e1] @ vals[tree.echild[e0:e1]])
        npt.assert_allclose(out[i - lo], ref, atol=1e-14)

import json

import numpy as np
import numpy.testing as npt
import pytest

from orthres.errors import InvariantViolation
from orthres.ftree import (AdaptedProcess, ScenarioTree, TimeGrid, TreeBuilder,
                           backward_closure, cond_exp, is_martingale,
                           pathwise_bracket, predictable_bracket, psd_cholesky,
                           tree_from_json, tree_to_json)
from orthres.models import ModelConfig, build

from conftest import random_full_tree, random_martingale


def binary_tree(K=2, h=1.0, recombine=False):
    built = build(ModelConfig("binary", K=K,
                              params={"h": h, "recombine": recombine}))
    return built.tree, built.M


# -- TimeGrid ---------------------------------------------------------------

def test_timegrid_uniform():
    g = TimeGrid.uniform(4, 2.0)
    assert g.K == 4
    assert g.T == 2.0
    npt.assert_allclose(np.diff(g.t), 0.5)


def test_timegrid_rejects_bad_grids():
    with pytest.raises(InvariantViolation):
        TimeGrid(np.array([0.0]))
    with pytest.raises(InvariantViolation):
        TimeGrid(np.array([0.1, 0.5, 1.0]))
    with pytest.raises(InvariantViolation):
        TimeGrid(np.array([0.0, 0.5, 0.5]))


# -- tree structure ---------------------------------------------------------

def test_builder_full_binary_counts():
    tree, _ = binary_tree(K=2)
    assert tree.n_nodes == 7
    assert tree.is_tree
    assert tree.level_slice(0) == (0, 1)
    assert tree.level_slice(2) == (3, 7)
    npt.assert_allclose(tree.path_prob[3:], 0.25)


def test_builder_recombining_lattice():
    tree, _ = binary_tree(K=2, recombine=True)
    assert tree.n_nodes == 6
    assert not tree.is_tree
    assert tree.parent[0] == -1
    # the middle terminal node has two incoming edges
    assert (tree.parent == -2).sum() == 1


def test_validate_rejects_leaky_probabilities():
    b = TreeBuilder(TimeGrid.uniform(1))
    b.begin_level()
    b.child(0, 0.5)
    b.child(0, 0.4)
    b.end_level()
    with pytest.raises(InvariantViolation):
        b.build()


def test_level_mass_is_one(rng):
    tree = random_full_tree(rng, K=4)
    for k in range(tree.K + 1):
        lo, hi = tree.level_slice(k)
        npt.assert_allclose(tree.path_prob[lo:hi].sum(), 1.0, atol=1e-12)


# -- conditional expectation ------------------------------------------------

def test_cond_exp_terminal_mean(rng):
    tree = random_full_tree(rng, K=3)
    lo, hi = tree.level_slice(tree.K)
    vals = np.zeros(tree.n_nodes)
    vals[lo:hi] = rng.normal(size=hi - lo)
    e0 = cond_exp(tree, vals, 0)
    npt.assert_allclose(e0[0, 0], tree.path_prob[lo:hi] @ vals[lo:hi],
                        atol=1e-12)


def test_cond_exp_tower_property(rng):
    for trial in range(10):
        tree = random_full_tree(rng, K=4)
        vals = np.zeros(tree.n_nodes)
        lo, hi = tree.level_slice(tree.K)
        vals[lo:hi] = rng.normal(size=hi - lo)
        inner = cond_exp(tree, vals, 2)           # E[X | F_2]
        padded = np.zeros(tree.n_nodes)
        a, b = tree.level_slice(2)
        padded[a:b] = inner[:, 0]
        via_tower = cond_exp(tree, padded, 1, of_level=2)
        direct = cond_exp(tree, vals, 1)
        npt.assert_allclose(via_tower, direct, atol=1e-12)


def test_backward_closure_is_martingale(rng):
    tree = random_full_tree(rng, K=4)
    lo, hi = tree.level_slice(tree.K)
    Y = backward_closure(tree, rng.normal(size=hi - lo))
    assert is_martingale(tree, Y, tol=1e-11)


def test_is_martingale_detects_drift():
    tree, M = binary_tree(K=3, h=0.5)
    drift = AdaptedProcess(tree, M.scalar + 0.1 * tree.node_level)
    chk = is_martingale(tree, drift)
    assert not chk
    npt.assert_allclose(chk.max_violation, 0.1, atol=1e-12)


# -- psd_cholesky -----------------------------------------------------------

def test_psd_cholesky_reconstructs(rng):
    for _ in range(20):
        d = int(rng.integers(1, 5))
        A = rng.normal(size=(d, d))
        S = A @ A.T
        L = psd_cholesky(S)
        npt.assert_allclose(L @ L.T, S, atol=1e-10 * max(1, np.abs(S).max()))
        assert np.allclose(L, np.tril(L))


def test_psd_cholesky_rank_deficient():
    S = np.array([[1.0, 1.0], [1.0, 1.0]])
    L = psd_cholesky(S)
    npt.assert_allclose(L @ L.T, S, atol=1e-12)
    assert L[1, 1] == 0.0


def test_psd_cholesky_rejects_indefinite():
    with pytest.raises(InvariantViolation):
        psd_cholesky(np.array([[1.0, 0.0], [0.0, -1.0]]))


# -- brackets and clock -----------------------------------------------------

def test_binary_clock_closed_form():
    h = 0.5
    tree, M = binary_tree(K=3, h=h)
    clock = predictable_bracket(tree, M)
    nt = tree.n_nonterminal
    npt.assert_allclose(clock.sigma.ravel(), h ** 2, atol=1e-14)
    # deterministic clock: C_k = arctan(k h^2)
    for k in range(tree.K + 1):
        lo, hi = tree.level_slice(k)
        npt.assert_allclose(clock.C.values[lo:hi, 0], np.arctan(k * h ** 2),
                            atol=1e-14)
    dC = clock.dC.values
    q = clock.q.values.reshape(nt)
    npt.assert_allclose(q ** 2 * dC, h ** 2, atol=1e-14)


def test_zero_variance_step_degenerates():
    b = TreeBuilder(TimeGrid.uniform(2))
    b.begin_level()
    b.child(0, 1.0)                    # constant step
    b.end_level()
    b.begin_level()
    b.child(1, 0.5)
    b.child(1, 0.5)
    b.end_level()
    tree = b.build()
    M = AdaptedProcess(tree, np.array([0.0, 0.0, -1.0, 1.0]))
    clock = predictable_bracket(tree, M)
    assert clock.dC.values[0] == 0.0
    assert clock.q.values[0, 0, 0] == 0.0
    assert clock.dC.values[1] > 0


def test_d2_independent_components_diagonal_q():
    v1, v2 = 0.09, 0.25
    b = TreeBuilder(TimeGrid.uniform(1), d=2)
    b.begin_level()
    for _ in range(4):
        b.child(0, 0.25)
    b.end_level()
    tree = b.build()
    s1, s2 = np.sqrt(v1), np.sqrt(v2)
    vals = np.array([[0, 0], [s1, s2], [s1, -s2], [-s1, s2], [-s1, -s2]],
                    dtype=float)
    M = AdaptedProcess(tree, vals)
    assert is_martingale(tree, M)
    clock = predictable_bracket(tree, M)
    dC = clock.dC.values[0]
    q = clock.q.values[0]
    npt.assert_allclose(q, np.diag([np.sqrt(v1 / dC), np.sqrt(v2 / dC)]),
                        atol=1e-12)


def test_pathwise_bracket_binary():
    h = 0.5
    tree, M = binary_tree(K=3, h=h)
    B = pathwise_bracket(tree, M)
    for k in range(tree.K + 1):
        lo, hi = tree.level_slice(k)
        npt.assert_allclose(B.values[lo:hi, 0], k * h ** 2, atol=1e-14)


def test_pathwise_bracket_rejects_lattice():
    tree, M = binary_tree(K=3, recombine=True)
    with pytest.raises(InvariantViolation):
        pathwise_bracket(tree, M)


def test_predictable_equals_mean_pathwise(rng):
    tree = random_full_tree(rng, K=3)
    M = random_martingale(rng, tree)
    clock = predictable_bracket(tree, M)
    B = pathwise_bracket(tree, M)
    lo, hi = tree.level_slice(tree.K)
    # E[[M]_T] equals the terminal accumulated conditional-variance trace
    npt.assert_allclose(tree.path_prob[lo:hi] @ B.values[lo:hi, 0],
                        tree.path_prob[lo:hi] @ clock.trace[lo:hi],
                        atol=1e-10)


# -- serialization ----------------------------------------------------------

def test_json_roundtrip_tree():
    tree, M = binary_tree(K=2, h=0.25)
    text = tree_to_json(tree, M)
    tree2, M2 = tree_from_json(text)
    assert tree2.n_nodes == tree.n_nodes
    npt.assert_allclose(tree2.eprob, tree.eprob)
    npt.assert_allclose(M2.values, M.values)
    assert json.loads(text)  # valid JSON document


def test_json_roundtrip_lattice():
    tree, M = binary_tree(K=3, recombine=True)
    tree2, M2 = tree_from_json(tree_to_json(tree, M))
    assert not tree2.is_tree
    assert tree2.n_nodes == tree.n_nodes
    npt.assert_allclose(tree2.path_prob, tree.path_prob)
    npt.assert_allclose(M2.values, M.values)

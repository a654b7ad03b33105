"""Estimation-layer tests: clustering, the trait-mixing solve, subsample
and degree-model estimators, and the parametric bootstrap."""

import numpy as np
import pytest
from scipy.cluster.hierarchy import fcluster, linkage

from netpartial.errors import NumericalError
from netpartial.estimation import (
    _agglomerate,
    bootstrap_ard,
    cluster_ard,
    estimate_sbm_from_ard,
    estimate_sbm_from_rds,
    estimate_sbm_from_subgraph,
    fit_beta_model,
    normalize_ard,
    solve_block_probs,
    trait_block_fractions,
    trait_block_rates,
)
from netpartial.graphs import Graph, SbmParams, sample_sbm
from netpartial.partial import (
    ArdMatrix,
    ard_of,
    mask_edges,
    sample_induced_subgraph,
    sample_rds,
    split_traits,
)


def _complete_graph(n):
    ii, jj = np.triu_indices(n, k=1)
    return Graph.from_edges(n, ii, jj)


def _partition(labels):
    sets = {}
    for i, c in enumerate(labels):
        sets.setdefault(int(c), set()).add(i)
    return frozenset(frozenset(s) for s in sets.values())


def test_normalize_ard_scales_by_group_size():
    traits = np.array([[1, 0], [1, 0], [0, 1]])
    counts = np.array([[2, 1], [0, 0], [1, 1]])
    x = normalize_ard(ArdMatrix(counts, traits))
    np.testing.assert_allclose(x, [[1.0, 1.0], [0.0, 0.0], [0.5, 1.0]])
    empty = np.array([[1, 0], [1, 0], [1, 0]])
    with pytest.raises(ValueError):
        normalize_ard(ArdMatrix(counts, empty))


def test_agglomerate_matches_scipy_average_linkage():
    rng = np.random.default_rng(0)
    for k in (2, 3, 5):
        points = rng.standard_normal((40, 4))
        mine = _agglomerate(points, k)
        ref = fcluster(linkage(points, method="average"), k, criterion="maxclust")
        assert _partition(mine) == _partition(ref)


def test_agglomerate_trivial_cuts():
    points = np.random.default_rng(1).standard_normal((8, 2))
    assert len(set(_agglomerate(points, 8).tolist())) == 8
    assert len(set(_agglomerate(points, 1).tolist())) == 1
    with pytest.raises(ValueError):
        _agglomerate(points, 0)
    with pytest.raises(ValueError):
        _agglomerate(points, 9)


def test_cluster_ard_separates_exact_rows():
    # two distinct normalized-row patterns
    traits = np.eye(2, dtype=np.int64)[np.array([0, 0, 1, 1])]
    counts = np.array([[2, 0], [2, 0], [0, 2], [0, 2]])
    labels = cluster_ard(ArdMatrix(counts, traits), 2)
    assert labels[0] == labels[1]
    assert labels[2] == labels[3]
    assert labels[0] != labels[2]


def test_cluster_ard_row_permutation_equivariant():
    rng = np.random.default_rng(5)
    counts = rng.integers(0, 6, size=(20, 3))
    traits = np.eye(3, dtype=np.int64)[rng.integers(0, 3, size=20)]
    ard = ArdMatrix(counts, traits)
    labels = cluster_ard(ard, 3)
    perm = rng.permutation(20)
    labels_p = cluster_ard(ArdMatrix(counts[perm], traits[perm]), 3)
    # permuted input yields the permuted partition: map row positions of
    # the permuted data back to original node ids and compare
    mapped_back = frozenset(
        frozenset(int(perm[i]) for i in block) for block in _partition(labels_p)
    )
    assert mapped_back == _partition(labels)


def test_trait_block_fractions_indicator_case():
    mem = np.array([0, 0, 1, 1])
    traits = split_traits(mem, 1)
    mix = trait_block_fractions(traits, mem, 2)
    np.testing.assert_allclose(mix, np.eye(2))
    half = np.array([[1, 0], [0, 1], [1, 0], [0, 1]])
    mix2 = trait_block_fractions(half, mem, 2)
    np.testing.assert_allclose(mix2, np.full((2, 2), 0.5))


def test_trait_block_rates_on_known_graph():
    # path 0-1-2: traits {0},{1},{2}; blocks {0,1} and {2}
    g = Graph.from_edges(3, [0, 1], [1, 2])
    traits = np.eye(3, dtype=np.int64)
    mem = np.array([0, 0, 1])
    rates = trait_block_rates(ard_of(g, traits), mem, 2)
    # block averages of per-trait counts, scaled by n_t = 1
    np.testing.assert_allclose(rates, [[0.5, 0.0], [0.5, 1.0], [0.5, 0.0]])


def test_solve_block_probs_identity_mix():
    rates = np.array([[0.4, 0.2], [0.1, 0.9]])
    p, info = solve_block_probs(np.eye(2), rates)
    np.testing.assert_allclose(p, 0.5 * (rates + rates.T), atol=1e-8)
    assert info["converged"]


def test_solve_block_probs_exact_recovery():
    rng = np.random.default_rng(2)
    for trial in range(5):
        k = 3
        p_true = rng.uniform(0.05, 0.6, size=(k, k))
        p_true = 0.5 * (p_true + p_true.T)
        mix = rng.uniform(0.0, 1.0, size=(6, k))
        mix /= mix.sum(axis=1, keepdims=True)
        p, info = solve_block_probs(mix, mix @ p_true)
        assert np.abs(p - p_true).max() < 1e-8


def test_solve_block_probs_hand_system():
    mix = np.array([[1.0, 0.0], [0.5, 0.5]])
    p_true = np.array([[0.6, 0.2], [0.2, 0.4]])
    p, _ = solve_block_probs(mix, mix @ p_true)
    np.testing.assert_allclose(p, p_true, atol=1e-8)


def test_solve_block_probs_box_binds():
    # unconstrained optimum sits above 1; solution must stay in the box
    mix = np.eye(2)
    rates = np.array([[1.4, 0.2], [0.2, 0.5]])
    p, _ = solve_block_probs(mix, rates)
    assert p.max() <= 1.0 + 1e-12
    np.testing.assert_allclose(p[0, 0], 1.0, atol=1e-9)
    np.testing.assert_allclose(p[1, 1], 0.5, atol=1e-8)


def test_solve_block_probs_weights_keep_recovery():
    rng = np.random.default_rng(3)
    p_true = np.array([[0.5, 0.1, 0.2], [0.1, 0.3, 0.05], [0.2, 0.05, 0.6]])
    mix = rng.dirichlet(np.ones(3), size=7)
    p, _ = solve_block_probs(mix, mix @ p_true, weights=np.array([5.0, 1.0, 2.0]))
    assert np.abs(p - p_true).max() < 1e-8


def test_solve_block_probs_input_guards():
    with pytest.raises(ValueError):
        solve_block_probs(np.ones((2, 3)), np.ones((2, 3)))
    with pytest.raises(ValueError):
        solve_block_probs(np.eye(2), np.ones((3, 2)))
    dup = np.array([[1.0, 1.0], [1.0, 1.0], [1.0, 1.0]])
    with pytest.raises(NumericalError):
        solve_block_probs(dup, np.zeros((3, 2)))


def test_estimate_sbm_from_ard_recovers_blocks():
    n = 240
    mem = np.repeat([0, 1, 2], n // 3)
    P = np.array([[0.45, 0.05, 0.05], [0.05, 0.3, 0.05], [0.05, 0.05, 0.2]])
    params = SbmParams(probs=P, memberships=mem)
    g = sample_sbm(params, rng_seed=17)
    est = estimate_sbm_from_ard(ard_of(g, split_traits(mem, 2)), 3)
    assert est.kind == "sbm"
    assert est.n_blocks == 3
    assert set(est.diagnostics) >= {"cond", "cluster_sizes", "converged"}
    # align by size ordering: blocks were built equal-sized, so match on
    # the diagonal through the best permutation
    from itertools import permutations

    err = min(
        np.abs(est.probs[np.ix_(p, p)] - P).max() for p in permutations(range(3))
    )
    assert err < 0.08


def test_estimate_sbm_from_ard_unconstrained_path():
    mem = np.repeat([0, 1], 60)
    P = np.array([[0.5, 0.05], [0.05, 0.35]])
    g = sample_sbm(SbmParams(probs=P, memberships=mem), rng_seed=3)
    est = estimate_sbm_from_ard(ard_of(g, split_traits(mem, 2)), 2, constrained=False)
    assert est.probs.min() >= 0.0 and est.probs.max() <= 1.0
    np.testing.assert_allclose(est.probs, est.probs.T)


def test_subgraph_estimator_full_observation():
    # two disjoint triangles, full induced sample: exact recovery
    g = Graph.from_edges(6, [0, 0, 1, 3, 3, 4], [1, 2, 2, 4, 5, 5])
    mem = np.repeat([0, 1], 3)
    s = sample_induced_subgraph(g, 6, mem, rng_seed=0)
    est = estimate_sbm_from_subgraph(s, mem, 2)
    np.testing.assert_allclose(est.probs, np.eye(2))


def test_subgraph_estimator_ipw_mask():
    g = _complete_graph(30)
    mem = np.zeros(30, dtype=np.int64)
    s = mask_edges(g, 0.5, rng_seed=8)
    est = estimate_sbm_from_subgraph(s, mem, 1)
    # IPW doubles each retained count; the cap keeps the entry at one
    kept = s.edges.shape[0]
    expect = min(2.0 * kept / (30 * 29 / 2), 1.0)
    np.testing.assert_allclose(est.probs[0, 0], expect)


def test_subgraph_estimator_guards():
    g = _complete_graph(6)
    mem = np.repeat([0, 1], 3)
    rds = sample_rds(g, seeds=np.array([0]), coupons=2, max_m=4, rng_seed=0)
    with pytest.raises(ValueError):
        estimate_sbm_from_subgraph(rds, mem, 2)
    # a singleton observed block leaves its diagonal pair empty
    mem2 = np.zeros(6, dtype=np.int64)
    mem2[5] = 1
    s = sample_induced_subgraph(g, 2, mem2, rng_seed=1)
    assert (mem2[s.nodes] == 1).sum() == 1
    with pytest.raises(NumericalError):
        estimate_sbm_from_subgraph(s, mem2, 2)


def test_rds_estimator_complete_two_types():
    g = _complete_graph(8)
    mem = np.repeat([0, 1], 4)
    s = sample_rds(g, seeds=np.array([0, 4]), coupons=3, max_m=8, rng_seed=2)
    assert s.m == 8
    est = estimate_sbm_from_rds(s, mem, 2)
    np.testing.assert_allclose(est.probs, np.ones((2, 2)))


def test_rds_estimator_disconnected_types():
    # two disjoint triangles: no cross contacts among recruits
    g = Graph.from_edges(6, [0, 0, 1, 3, 3, 4], [1, 2, 2, 4, 5, 5])
    mem = np.repeat([0, 1], 3)
    s = sample_rds(g, seeds=np.array([0, 3]), coupons=2, max_m=6, rng_seed=4)
    est = estimate_sbm_from_rds(s, mem, 2)
    np.testing.assert_allclose(est.probs, np.eye(2))
    with pytest.raises(ValueError):
        estimate_sbm_from_rds(
            sample_induced_subgraph(g, 6, mem, rng_seed=0), mem, 2
        )


def test_fit_beta_model_closed_forms():
    tri = fit_beta_model(np.array([2.0, 2.0, 2.0]))
    np.testing.assert_allclose(tri.nu, np.ones(3), atol=1e-8)
    assert tri.diagnostics["converged"]
    # 2-regular ring of 6: nu solves (n-1) nu^2 = 2
    ring = fit_beta_model(np.full(6, 2.0))
    np.testing.assert_allclose(ring.nu, np.full(6, np.sqrt(0.4)), atol=1e-8)
    with pytest.raises(ValueError):
        fit_beta_model(np.array([0.0, 2.0, 2.0]))
    with pytest.raises(ValueError):
        fit_beta_model(np.array([1.0, 1.0]), n=3)


def test_bootstrap_degenerate_model_is_deterministic():
    # P in {0,1}: every replicate redraws the same graph, so all replicate
    # estimates coincide, whatever the bootstrap seed
    mem = np.repeat([0, 1], 4)
    traits = split_traits(mem, 2)
    g = sample_sbm(SbmParams(probs=np.eye(2), memberships=mem), rng_seed=0)
    est = estimate_sbm_from_ard(ard_of(g, traits), 2)
    est.probs = np.eye(2)
    boot = bootstrap_ard(est, traits, b=5, rng_seed=7)
    other = bootstrap_ard(est, traits, b=3, rng_seed=123)
    assert boot.n_failed == 0 and other.n_failed == 0
    first = boot.estimates[0].probs
    for rep in boot.estimates + other.estimates:
        np.testing.assert_array_equal(rep.probs, first)
    # within-block dyads of the redrawn graph are certain, so the diagonal
    # matches the closed small-sample rate (n_t - 1) / n_t
    np.testing.assert_allclose(np.diag(first), [0.75, 0.75], atol=1e-8)


def test_bootstrap_reproducible_and_aligned():
    n = 150
    mem = np.repeat([0, 1, 2], n // 3)
    P = np.array([[0.5, 0.05, 0.05], [0.05, 0.35, 0.05], [0.05, 0.05, 0.2]])
    traits = split_traits(mem, 2)
    g = sample_sbm(SbmParams(probs=P, memberships=mem), rng_seed=21)
    est = estimate_sbm_from_ard(ard_of(g, traits), 3)
    b1 = bootstrap_ard(est, traits, b=8, rng_seed=5)
    b2 = bootstrap_ard(est, traits, b=8, rng_seed=5)
    assert b1.n_failed == b2.n_failed == 0
    for r1, r2 in zip(b1.estimates, b2.estimates):
        np.testing.assert_array_equal(r1.probs, r2.probs)
    # label alignment keeps replicates near the fitted matrix entrywise
    mean_probs = np.mean([r.probs for r in b1.estimates], axis=0)
    assert np.abs(mean_probs - est.probs).max() < 0.1

"""Iterated-expectation features, regression fits, the missing-data EM, and
the design-based estimators."""

from itertools import product

import numpy as np
import pytest
from scipy.special import expit

from netpartial.errors import NumericalError, PositivityError
from netpartial.graphs import Graph, SbmParams, sample_sbm
from netpartial.inference import (
    FeatureAverage,
    WorkingCov,
    average_features,
    dm_estimator,
    draw_graphs,
    features_on,
    fit_linear,
    fit_logistic_em,
    ht_estimator,
    plugin_gate,
    plugin_mean_outcome,
)
from netpartial.outcomes import (
    ConfounderSpec,
    FeatureSpec,
    TreatedCount,
    TreatedFraction,
)
from netpartial.partial import mask_edges, sample_induced_subgraph, sample_rds
from netpartial.treatments import BernoulliDesign, ClusterDesign


def _two_block_params(n, p_in=0.3, p_out=0.1):
    mem = np.repeat([0, 1], n // 2)
    return SbmParams(
        probs=np.array([[p_in, p_out], [p_out, p_in]]), memberships=mem
    )


def _complete_graph(n):
    ii, jj = np.triu_indices(n, k=1)
    return Graph.from_edges(n, ii, jj)


# ---------------------------------------------------------------------------
# conditional graph draws and averaged features


def test_full_graph_passthrough():
    params = _two_block_params(20)
    g = sample_sbm(params, rng_seed=1)
    draws = draw_graphs(params, g, 4, rng_seed=9)
    assert all(d is g for d in draws)


def test_model_draws_are_seeded():
    params = _two_block_params(20)
    d1 = draw_graphs(params, None, 3, rng_seed=5)
    d2 = draw_graphs(params, None, 3, rng_seed=5)
    for a, b in zip(d1, d2):
        assert a == b
    assert any(a != b for a, b in zip(d1, draw_graphs(params, None, 3, rng_seed=6)))


def test_induced_sample_dyads_stay_pinned():
    params = _two_block_params(30, 0.5, 0.2)
    g = sample_sbm(params, rng_seed=3)
    s = sample_induced_subgraph(g, 12, params.memberships, rng_seed=0)
    observed = {tuple(e) for e in s.edges}
    inside = s.node_mask()
    for d in draw_graphs(params, s, 6, rng_seed=11):
        src, dst = d.edges()
        got = {
            (i, j) for i, j in zip(src.tolist(), dst.tolist())
            if inside[i] and inside[j]
        }
        assert got == observed


def test_rds_rows_stay_pinned():
    params = _two_block_params(30, 0.5, 0.2)
    g = sample_sbm(params, rng_seed=4)
    s = sample_rds(g, seeds=np.array([0, 20]), coupons=2, max_m=10, rng_seed=2)
    recruited = s.node_mask()
    want = {
        tuple(e) for e in np.vstack([s.edges, np.sort(s.boundary, axis=1)])
    }
    for d in draw_graphs(params, s, 5, rng_seed=13):
        src, dst = d.edges()
        got = {
            (i, j) for i, j in zip(src.tolist(), dst.tolist())
            if recruited[i] or recruited[j]
        }
        assert got == want


def test_mask_sample_keeps_retained_edges():
    params = _two_block_params(24, 0.5, 0.3)
    g = sample_sbm(params, rng_seed=6)
    s = mask_edges(g, 0.6, rng_seed=1)
    retained = {tuple(e) for e in s.edges}
    for d in draw_graphs(params, s, 6, rng_seed=17):
        assert retained <= d.edge_key_set()


def test_mask_posterior_frequency():
    # unretained dyad with edge prob p and propensity r appears with
    # posterior probability p(1-r) / (1 - p r)
    n = 16
    params = SbmParams(
        probs=np.array([[0.5]]), memberships=np.zeros(n, dtype=np.int64)
    )
    g = sample_sbm(params, rng_seed=2)
    s = mask_edges(g, 0.5, rng_seed=3)
    retained = {tuple(e) for e in s.edges}
    target = 0.5 * 0.5 / (1 - 0.25)
    counts = {}
    l = 4000
    for d in draw_graphs(params, s, l, rng_seed=23):
        for e in d.edge_key_set() - retained:
            counts[e] = counts.get(e, 0) + 1
    freqs = np.array(
        [counts.get((i, j), 0) / l for i in range(n) for j in range(i + 1, n)
         if (i, j) not in retained]
    )
    se = np.sqrt(target * (1 - target) / l)
    assert abs(freqs.mean() - target) < 4 * se / np.sqrt(freqs.size) * 3


def test_average_features_constant_columns_have_zero_se():
    params = _two_block_params(20)
    a = np.zeros(20)
    spec = FeatureSpec(intercept=True, own_treatment=True)
    fa = average_features(params, None, a, None, spec, l=8, rng_seed=3)
    assert isinstance(fa, FeatureAverage)
    assert fa.n_draws == 8
    np.testing.assert_allclose(fa.matrix[:, 0], 1.0)
    np.testing.assert_allclose(fa.se, 0.0)


def test_average_features_exact_on_full_graph():
    params = _two_block_params(20, 0.4, 0.2)
    g = sample_sbm(params, rng_seed=8)
    a = (np.arange(20) % 2).astype(float)
    spec = FeatureSpec(intercept=True, exposure=TreatedCount())
    one = features_on([g], a, None, spec)[0]
    fa = average_features(params, g, a, None, spec, l=7, rng_seed=1)
    np.testing.assert_array_equal(fa.matrix, one)
    np.testing.assert_allclose(fa.se, 0.0)


def test_average_features_matches_analytic_expectation():
    # E[sum_j a_j 1{i ~ j}] = sum_{j != i} a_j P[k_i, k_j]
    n = 40
    params = _two_block_params(n, 0.35, 0.15)
    mem = params.memberships
    rng = np.random.default_rng(0)
    a = (rng.random(n) < 0.5).astype(float)
    spec = FeatureSpec(intercept=False, exposure=TreatedCount())
    l = 2000
    fa = average_features(params, None, a, None, spec, l=l, rng_seed=21)
    expect = np.array(
        [
            sum(a[j] * params.probs[mem[i], mem[j]] for j in range(n) if j != i)
            for i in range(n)
        ]
    )
    resid = np.abs(fa.matrix[:, 0] - expect)
    assert (resid < 4 * np.maximum(fa.se[:, 0], 1e-12)).all()
    assert resid.mean() < 0.1


def test_average_features_se_shrinks_with_draws():
    params = _two_block_params(30, 0.4, 0.1)
    a = (np.arange(30) % 3 == 0).astype(float)
    spec = FeatureSpec(intercept=False, exposure=TreatedFraction())
    se_small = average_features(params, None, a, None, spec, 200, 5).se.mean()
    se_big = average_features(params, None, a, None, spec, 800, 5).se.mean()
    # quadrupling draws should halve the Monte Carlo error, within 20%
    assert abs(se_small / se_big - 2.0) < 0.4


# ---------------------------------------------------------------------------
# linear and logistic fits


def _toy_fit_inputs(n=60, seed=0):
    params = _two_block_params(n, 0.4, 0.15)
    g = sample_sbm(params, rng_seed=seed)
    rng = np.random.default_rng(seed)
    a = (rng.random(n) < 0.5).astype(float)
    x = rng.standard_normal((n, 1))
    spec = FeatureSpec(
        intercept=True,
        own_treatment=True,
        exposure=TreatedFraction(),
        confounders=ConfounderSpec(covariate_cols=(0,)),
    )
    fa = average_features(params, g, a, x, spec, l=1, rng_seed=seed)
    return params, g, a, x, spec, fa, rng


def test_fit_linear_interpolates_exact_responses():
    *_, fa, rng = _toy_fit_inputs()
    beta = np.array([0.5, 1.0, -2.0, 0.25])
    y = fa.matrix @ beta
    fit = fit_linear(y, fa)
    np.testing.assert_allclose(fit.beta, beta, atol=1e-9)
    np.testing.assert_allclose(fit.cov, 0.0, atol=1e-16)
    assert fit.link == "identity"
    assert fit.diagnostics["n"] == 60


def test_fit_linear_intercept_only_is_mean():
    y = np.array([1.0, 2.0, 3.0, 6.0])
    fa = FeatureAverage(np.ones((4, 1)), np.zeros((4, 1)), 1)
    fit = fit_linear(y, fa)
    np.testing.assert_allclose(fit.beta, [3.0])
    # sandwich variance of the mean: sum (y - mean)^2 / n^2
    np.testing.assert_allclose(fit.cov[0, 0], ((y - 3) ** 2).sum() / 16)


def test_fit_linear_rejects_collinear_design():
    h = np.column_stack([np.ones(10), np.ones(10)])
    fa = FeatureAverage(h, np.zeros_like(h), 1)
    with pytest.raises(NumericalError):
        fit_linear(np.arange(10.0), fa)


def test_fit_linear_sandwich_is_psd_both_working_covs():
    params, g, a, x, spec, fa, rng = _toy_fit_inputs(n=80, seed=3)
    y = fa.matrix @ np.array([1.0, 0.5, -0.3, 0.2]) + rng.standard_normal(80)
    for wc in (
        WorkingCov(),
        WorkingCov(kind="cluster", clusters=tuple(params.memberships.tolist())),
    ):
        fit = fit_linear(y, fa, working_cov=wc)
        eigs = np.linalg.eigvalsh(0.5 * (fit.cov + fit.cov.T))
        assert eigs.min() > -1e-12
    with pytest.raises(ValueError):
        fit_linear(y, fa, working_cov=WorkingCov(kind="cluster", clusters=(0, 1)))
    with pytest.raises(ValueError):
        WorkingCov(kind="bogus")


def test_cluster_se_grows_under_shared_shocks():
    # responses share a cluster-level shock: independence understates SE
    rng = np.random.default_rng(7)
    n = 200
    clusters = tuple(np.repeat(np.arange(20), 10).tolist())
    h = np.column_stack([np.ones(n), rng.standard_normal(n)])
    fa = FeatureAverage(h, np.zeros_like(h), 1)
    shock = rng.standard_normal(20)[np.asarray(clusters)]
    y = h @ np.array([1.0, 0.5]) + 2.0 * shock + 0.1 * rng.standard_normal(n)
    ind = fit_linear(y, fa)
    clu = fit_linear(y, fa, working_cov=WorkingCov(kind="cluster", clusters=clusters))
    assert clu.cov[0, 0] > 2 * ind.cov[0, 0]


def _direct_logistic_mle(h, y, iters=60):
    beta = np.zeros(h.shape[1])
    for _ in range(iters):
        mu = expit(h @ beta)
        w = mu * (1 - mu)
        grad = h.T @ (y - mu)
        hess = (h * w[:, None]).T @ h
        beta = beta + np.linalg.solve(hess, grad)
    return beta


def test_em_on_full_graph_matches_direct_mle():
    params, g, a, x, spec, fa, rng = _toy_fit_inputs(n=100, seed=5)
    h = fa.matrix
    p = expit(h @ np.array([-0.3, 0.8, 0.5, -0.4]))
    y = (rng.random(100) < p).astype(float)
    fit = fit_logistic_em(y, params, g, a, x, spec, l=3, rng_seed=3)
    direct = _direct_logistic_mle(h, y)
    np.testing.assert_allclose(fit.beta, direct, atol=1e-6)
    assert fit.diagnostics["converged"]
    assert fit.link == "logistic"


def test_em_loglik_is_monotone():
    for seed in range(10):
        params = _two_block_params(40, 0.35, 0.1)
        rng = np.random.default_rng(seed)
        a = (rng.random(40) < 0.5).astype(float)
        y = (rng.random(40) < 0.5).astype(float)
        spec = FeatureSpec(intercept=True, own_treatment=True, exposure=TreatedFraction())
        fit = fit_logistic_em(
            y, params, None, a, None, spec, l=6, rng_seed=seed
        )
        traj = fit.diagnostics["loglik_trajectory"]
        diffs = np.diff(traj)
        assert (diffs >= -1e-8 * (1 + np.abs(traj[:-1]))).all()


def test_em_rejects_nonbinary_response():
    params = _two_block_params(10)
    spec = FeatureSpec(intercept=True)
    with pytest.raises(ValueError):
        fit_logistic_em(
            np.linspace(0, 1, 10), params, None, np.zeros(10), None, spec, 2, 0
        )


def test_em_flags_separation():
    # own treatment separates the response perfectly
    params = _two_block_params(40)
    g = sample_sbm(params, rng_seed=0)
    a = (np.arange(40) % 2).astype(float)
    y = a.copy()
    spec = FeatureSpec(intercept=True, own_treatment=True)
    fit = fit_logistic_em(y, params, g, a, None, spec, l=1, rng_seed=0)
    assert fit.diagnostics["separation"]


# ---------------------------------------------------------------------------
# plug-in effect estimates


def test_plugin_gate_linear_in_coefficients():
    params, g, a, x, spec, fa, _ = _toy_fit_inputs(n=50, seed=2)
    covs = np.zeros((4, 4))
    args = (params, g, x, spec, 2, 11)
    f1 = plugin_gate(_mk_fit([1.0, 0.0, 0.0, 0.0], covs), *args)
    f2 = plugin_gate(_mk_fit([0.0, 1.0, 0.0, 0.0], covs), *args)
    combo = plugin_gate(_mk_fit([2.0, -3.0, 0.0, 0.0], covs), *args)
    np.testing.assert_allclose(
        combo.estimate, 2 * f1.estimate - 3 * f2.estimate, atol=1e-12
    )
    assert combo.method == "regression-plug-in"


def _mk_fit(beta, cov, link="identity"):
    from netpartial.inference import FitResult

    return FitResult(
        beta=np.asarray(beta, dtype=float),
        cov=np.asarray(cov, dtype=float),
        working_cov=WorkingCov(),
        link=link,
        diagnostics={},
    )


def test_plugin_gate_reads_off_treatment_coefficients():
    # identity link, features (1, a, frac treated): switching all units on
    # moves the mean response by beta_a + beta_frac exactly
    n = 30
    params = _two_block_params(n, 0.5, 0.3)
    g = sample_sbm(params, rng_seed=1)
    spec = FeatureSpec(intercept=True, own_treatment=True, exposure=TreatedFraction())
    beta = np.array([0.3, 1.1, 0.7])
    fit = _mk_fit(beta, np.zeros((3, 3)))
    # isolated nodes would hold exposure at zero; this draw has none
    assert g.degrees.min() >= 1
    gate = plugin_gate(fit, params, g, None, spec, l=1, rng_seed=0)
    np.testing.assert_allclose(gate.estimate, 1.1 + 0.7, atol=1e-12)
    np.testing.assert_allclose(gate.se, 0.0)
    psi1 = plugin_mean_outcome(fit, params, g, np.ones(n), None, spec, 1, 0)
    psi0 = plugin_mean_outcome(fit, params, g, np.zeros(n), None, spec, 1, 0)
    np.testing.assert_allclose(psi1.estimate - psi0.estimate, gate.estimate)
    np.testing.assert_allclose(psi0.estimate, 0.3)


def test_plugin_gate_se_propagates_coefficient_noise():
    n = 20
    params = _two_block_params(n, 0.5, 0.5)
    g = sample_sbm(params, rng_seed=5)
    spec = FeatureSpec(intercept=True, own_treatment=True)
    fit = _mk_fit([0.0, 1.0], np.diag([0.04, 0.09]))
    gate = plugin_gate(fit, params, g, None, spec, l=1, rng_seed=0)
    # gradient is (0, 1): variance picks the treatment entry alone
    np.testing.assert_allclose(gate.se, 0.3)


def test_plugin_gate_logistic_and_callable_agree():
    params, g, a, x, spec, fa, rng = _toy_fit_inputs(n=40, seed=9)
    y = (rng.random(40) < 0.5).astype(float)
    fit = fit_logistic_em(y, params, g, a, x, spec, l=2, rng_seed=7)
    g1 = plugin_gate(fit, params, g, x, spec, l=2, rng_seed=7)
    g2 = plugin_gate(fit, params, g, x, spec, l=2, rng_seed=7, link=expit)
    np.testing.assert_allclose(g1.estimate, g2.estimate, atol=1e-10)
    np.testing.assert_allclose(g1.se, g2.se, atol=1e-6)


# ---------------------------------------------------------------------------
# design-based estimators


def test_ht_two_isolated_nodes_hand_value():
    g = Graph.from_edges(2, [], [])
    design = BernoulliDesign(p=0.5)
    est = ht_estimator(np.array([1.0, 1.0]), np.array([1, 0]), g, design)
    # (1/0.5 - 1/0.5) / 2 = 0
    np.testing.assert_allclose(est.estimate, 0.0)
    assert est.method == "horvitz-thompson"
    assert np.isnan(est.se)


def test_ht_exhaustive_unbiasedness_without_interference():
    # isolated nodes, outcomes depend on own arm only: averaging the
    # estimator over the full Bernoulli design recovers the exact contrast
    n = 4
    g = Graph.from_edges(n, [], [])
    p = 0.3
    design = BernoulliDesign(p=p)
    y1 = np.array([2.0, -1.0, 0.5, 3.0])
    y0 = np.array([1.0, 1.0, -0.5, 2.0])
    total = 0.0
    for bits in product([0, 1], repeat=n):
        a = np.array(bits, dtype=float)
        y = np.where(a == 1, y1, y0)
        w = np.prod(np.where(a == 1, p, 1 - p))
        total += w * ht_estimator(y, a, g, design).estimate
    np.testing.assert_allclose(total, (y1 - y0).mean(), atol=1e-12)


def test_ht_full_neighborhood_exposure():
    # path 0-1-2 under full treatment: every neighborhood fully treated
    g = Graph.from_edges(3, [0, 1], [1, 2])
    design = BernoulliDesign(p=0.5)
    y = np.array([1.0, 2.0, 3.0])
    est = ht_estimator(y, np.ones(3), g, design)
    p1 = np.array([0.25, 0.125, 0.25])
    np.testing.assert_allclose(
        est.estimate, (y / p1).sum() / 3
    )


def test_ht_requires_positivity():
    g = _complete_graph(4)
    design = ClusterDesign(clusters=(0, 0, 1, 1), n_treated=1)
    # nodes touch both clusters: both arms impossible
    with pytest.raises(PositivityError):
        ht_estimator(np.ones(4), np.array([1, 1, 0, 0]), g, design)


def test_ht_relabeling_invariance():
    params = _two_block_params(12, 0.6, 0.2)
    g = sample_sbm(params, rng_seed=2)
    a = (np.arange(12) % 2).astype(float)
    y = np.arange(12.0)
    design = BernoulliDesign(p=0.5)
    base = ht_estimator(y, a, g, design).estimate
    perm = np.random.default_rng(1).permutation(12)
    src, dst = g.edges()
    g2 = Graph.from_edges(12, perm[src], perm[dst])
    inv = np.empty(12, dtype=int)
    inv[perm] = np.arange(12)
    got = ht_estimator(y[inv], a[inv], g2, design).estimate
    np.testing.assert_allclose(got, base, atol=1e-12)


def test_dm_estimator_fixture():
    y = np.array([3.0, 1.0, 2.0, 0.0])
    a = np.array([1, 1, 0, 0])
    est = dm_estimator(y, a)
    np.testing.assert_allclose(est.estimate, 1.0)
    assert est.method == "difference-in-means"
    # two-sample standard error
    se = np.sqrt(np.var([3.0, 1.0], ddof=1) / 2 + np.var([2.0, 0.0], ddof=1) / 2)
    np.testing.assert_allclose(est.se, se)
    with pytest.raises(ValueError):
        dm_estimator(y, np.ones(4))

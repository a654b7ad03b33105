"""Kernel-level checks: dyad hash behavior and compiled/fallback agreement."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from netpartial.kernels import _ref

try:
    from netpartial.kernels import _fast
except ImportError:
    _fast = None

needs_ext = pytest.mark.skipif(_fast is None, reason="compiled extension not built")


def _dyads(n):
    ii, jj = np.triu_indices(n, k=1)
    return ii.astype(np.int64), jj.astype(np.int64)


def _edge_set(src, dst):
    return set(zip(src.tolist(), dst.tolist()))


def test_dyad_u01_is_deterministic():
    assert _ref.dyad_u01(7, 3, 5) == _ref.dyad_u01(7, 3, 5)
    assert _ref.dyad_u01(7, 3, 5) != _ref.dyad_u01(8, 3, 5)
    assert _ref.dyad_u01(7, 3, 5) != _ref.dyad_u01(7, 3, 6)


def test_dyad_uniforms_matches_scalar():
    ii, jj = _dyads(40)
    u = _ref.dyad_uniforms(123, ii, jj)
    for k in range(0, ii.shape[0], 37):
        assert u[k] == _ref.dyad_u01(123, int(ii[k]), int(jj[k]))


def test_dyad_uniforms_range_and_mean():
    ii, jj = _dyads(500)
    u = _ref.dyad_uniforms(2024, ii, jj)
    assert u.min() >= 0.0 and u.max() < 1.0
    # mean of ~125k uniforms: 4 sigma band around 1/2
    se = np.sqrt(1.0 / 12.0 / u.shape[0])
    assert abs(u.mean() - 0.5) < 4 * se


def test_dyad_uniforms_permutation_equivariant():
    ii, jj = _dyads(30)
    perm = np.random.default_rng(0).permutation(ii.shape[0])
    u = _ref.dyad_uniforms(5, ii, jj)
    up = _ref.dyad_uniforms(5, ii[perm], jj[perm])
    np.testing.assert_array_equal(u[perm], up)


@given(
    seed=st.integers(min_value=0, max_value=2**63 - 1),
    i=st.integers(min_value=0, max_value=10**6),
    j=st.integers(min_value=0, max_value=10**6),
)
@settings(max_examples=200, deadline=None)
def test_dyad_u01_always_in_unit_interval(seed, i, j):
    u = _ref.dyad_u01(seed, i, j)
    assert 0.0 <= u < 1.0


def test_block_sampler_covers_all_dyads():
    # P = 1 must return every i<j pair exactly once, in row-major order
    n = 23
    mem = np.zeros(n, dtype=np.int64)
    probs = np.ones((1, 1))
    src, dst = _ref.sample_block_graph(9, mem, probs)
    ii, jj = _dyads(n)
    np.testing.assert_array_equal(src, ii)
    np.testing.assert_array_equal(dst, jj)


def test_block_sampler_chunked_enumeration_matches_bruteforce():
    # small n exercises exact agreement with a direct double loop
    n = 17
    mem = np.array([i % 3 for i in range(n)], dtype=np.int64)
    probs = np.array([[0.9, 0.3, 0.1], [0.3, 0.7, 0.2], [0.1, 0.2, 0.5]])
    src, dst = _ref.sample_block_graph(77, mem, probs)
    expect = set()
    for i in range(n):
        for j in range(i + 1, n):
            if _ref.dyad_u01(77, i, j) < probs[mem[i], mem[j]]:
                expect.add((i, j))
    assert _edge_set(src, dst) == expect


def test_product_sampler_matches_bruteforce():
    n = 19
    nu = np.linspace(0.05, 0.9, n)
    src, dst = _ref.sample_product_graph(31, nu)
    expect = set()
    for i in range(n):
        for j in range(i + 1, n):
            if _ref.dyad_u01(31, i, j) < min(nu[i] * nu[j], 1.0):
                expect.add((i, j))
    assert _edge_set(src, dst) == expect


def _path_csr(n):
    # 0-1-2-...-(n-1)
    import scipy.sparse as sp

    rows = np.r_[np.arange(n - 1), np.arange(1, n)]
    cols = np.r_[np.arange(1, n), np.arange(n - 1)]
    a = sp.csr_matrix((np.ones(rows.shape[0]), (rows, cols)), shape=(n, n))
    return a.indptr.astype(np.int64), a.indices.astype(np.int64)


def test_threshold_cascade_on_path():
    indptr, indices = _path_csr(6)
    seeds = np.zeros(6, dtype=np.uint8)
    seeds[0] = 1
    thresholds = np.ones(6)
    out = _ref.threshold_cascade(indptr, indices, seeds, thresholds, 3)
    # threshold 1 spreads one hop per step
    np.testing.assert_array_equal(out, np.array([1, 1, 1, 1, 0, 0], dtype=np.uint8))
    out_all = _ref.threshold_cascade(indptr, indices, seeds, thresholds, 10)
    assert out_all.all()


def test_threshold_cascade_requires_threshold_count():
    indptr, indices = _path_csr(4)
    seeds = np.array([1, 0, 0, 0], dtype=np.uint8)
    out = _ref.threshold_cascade(indptr, indices, seeds, np.full(4, 2.0), 10)
    # interior nodes have degree 2 but never 2 adopted neighbors
    np.testing.assert_array_equal(out, seeds)


def test_hearing_exposure_accumulates_powers():
    indptr, indices = _path_csr(3)
    a = np.array([1.0, 0.0, 0.0])
    out = _ref.hearing_exposure(indptr, indices, a, np.array([0.5, 0.25]))
    # G a = (0,1,0); G^2 a = (1,0,1)
    np.testing.assert_allclose(out, [0.25, 0.5, 0.25])


def test_adjacency_matvec_is_csr_product():
    indptr, indices = _path_csr(5)
    x = np.arange(5.0)
    out = _ref.adjacency_matvec(indptr, indices, x)
    np.testing.assert_allclose(out, [1.0, 2.0, 4.0, 6.0, 3.0])


@needs_ext
def test_paths_agree_on_dyad_uniforms():
    ii, jj = _dyads(200)
    for seed in (0, 1, 2**31, 2**63 - 1):
        np.testing.assert_array_equal(
            _fast.dyad_uniforms(seed, ii, jj), _ref.dyad_uniforms(seed, ii, jj)
        )


@needs_ext
def test_paths_agree_on_block_sampler():
    mem = np.repeat(np.arange(3, dtype=np.int64), 80)
    probs = np.array([[0.4, 0.1, 0.05], [0.1, 0.3, 0.02], [0.05, 0.02, 0.2]])
    for seed in (5, 777):
        sf, df = _fast.sample_block_graph(seed, mem, probs)
        sr, dr = _ref.sample_block_graph(seed, mem, probs)
        np.testing.assert_array_equal(sf, sr)
        np.testing.assert_array_equal(df, dr)


@needs_ext
def test_paths_agree_on_product_sampler():
    nu = np.full(120, 0.3)
    sf, df = _fast.sample_product_graph(42, nu)
    sr, dr = _ref.sample_product_graph(42, nu)
    np.testing.assert_array_equal(sf, sr)
    np.testing.assert_array_equal(df, dr)


@needs_ext
def test_paths_agree_on_cascade_and_exposure():
    indptr, indices = _path_csr(30)
    seeds = np.zeros(30, dtype=np.uint8)
    seeds[[0, 15]] = 1
    thresholds = np.ones(30)
    np.testing.assert_array_equal(
        _fast.threshold_cascade(indptr, indices, seeds, thresholds, 7),
        _ref.threshold_cascade(indptr, indices, seeds, thresholds, 7),
    )
    a = np.random.default_rng(3).random(30)
    coeffs = np.array([0.5, 0.05, 0.005])
    np.testing.assert_allclose(
        _fast.hearing_exposure(indptr, indices, a, coeffs),
        _ref.hearing_exposure(indptr, indices, a, coeffs),
        rtol=0,
        atol=0,
    )
    x = np.random.default_rng(4).random(30)
    np.testing.assert_allclose(
        _fast.adjacency_matvec(indptr, indices, x),
        _ref.adjacency_matvec(indptr, indices, x),
        rtol=0,
        atol=0,
    )

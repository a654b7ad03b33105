"""Reference implementations of the sampling and propagation kernels.

Pure numpy/scipy versions of the routines in ``_fast.pyx``. The compiled
module is preferred at import time; these stay available as a fallback and
as the comparison baseline for the kernel benchmark. Both implementations
share the same counter-based dyad hash, so graph samples and cascades agree
exactly across the two paths.
"""

import numpy as np
import scipy.sparse as sp

_MASK = np.uint64(0xFFFFFFFFFFFFFFFF)
_GOLD = 0x9E3779B97F4A7C15
_MIX1 = 0xFF51AFD7ED558CCD
_MIX2 = 0xC4CEB9FE1A85EC53

# dyads per scratch chunk when enumerating i<j pairs
_CHUNK = 1 << 20


def _fmix_scalar(z):
    z &= 0xFFFFFFFFFFFFFFFF
    z ^= z >> 33
    z = (z * _MIX1) & 0xFFFFFFFFFFFFFFFF
    z ^= z >> 33
    z = (z * _MIX2) & 0xFFFFFFFFFFFFFFFF
    z ^= z >> 33
    return z


def dyad_u01(seed, i, j):
    """Uniform in [0, 1) for dyad (i, j), a pure function of (seed, i, j)."""
    h = _fmix_scalar((seed + _GOLD) & 0xFFFFFFFFFFFFFFFF)
    h = _fmix_scalar(h ^ (((i + 1) * _GOLD) & 0xFFFFFFFFFFFFFFFF))
    h = _fmix_scalar(h ^ (((j + 1) * _GOLD) & 0xFFFFFFFFFFFFFFFF))
    return (h >> 11) * 2.0**-53


def _fmix_vec(z):
    z ^= z >> np.uint64(33)
    z *= np.uint64(_MIX1)
    z ^= z >> np.uint64(33)
    z *= np.uint64(_MIX2)
    z ^= z >> np.uint64(33)
    return z


def dyad_uniforms(seed, ii, jj):
    """Vectorized ``dyad_u01`` over parallel index arrays."""
    h0 = np.uint64(_fmix_scalar((seed + _GOLD) & 0xFFFFFFFFFFFFFFFF))
    gi = (ii.astype(np.uint64) + np.uint64(1)) * np.uint64(_GOLD)
    gj = (jj.astype(np.uint64) + np.uint64(1)) * np.uint64(_GOLD)
    h = _fmix_vec(_fmix_vec(h0 ^ gi) ^ gj)
    return (h >> np.uint64(11)).astype(np.float64) * 2.0**-53


def _iter_dyad_chunks(n):
    # yields (ii, jj) covering all i < j in row-major order
    i0 = 0
    while i0 < n - 1:
        i1 = i0
        total = 0
        while i1 < n - 1 and total + (n - 1 - i1) <= _CHUNK:
            total += n - 1 - i1
            i1 += 1
        i1 = max(i1, i0 + 1)
        counts = np.arange(n - 1 - i0, n - 1 - i1, -1)
        ii = np.repeat(np.arange(i0, i1), counts)
        jj = np.concatenate([np.arange(i + 1, n) for i in range(i0, i1)])
        yield ii, jj
        i0 = i1


def sample_block_graph(seed, memberships, probs):
    """Sample i<j edges of a block model; returns (src, dst) int64 arrays."""
    n = memberships.shape[0]
    srcs, dsts = [], []
    for ii, jj in _iter_dyad_chunks(n):
        u = dyad_uniforms(seed, ii, jj)
        keep = u < probs[memberships[ii], memberships[jj]]
        srcs.append(ii[keep])
        dsts.append(jj[keep])
    if not srcs:
        e = np.empty(0, dtype=np.int64)
        return e, e.copy()
    return (
        np.concatenate(srcs).astype(np.int64),
        np.concatenate(dsts).astype(np.int64),
    )


def sample_product_graph(seed, nu):
    """Sample edges with P(i~j) = min(nu_i * nu_j, 1)."""
    n = nu.shape[0]
    srcs, dsts = [], []
    for ii, jj in _iter_dyad_chunks(n):
        u = dyad_uniforms(seed, ii, jj)
        keep = u < np.minimum(nu[ii] * nu[jj], 1.0)
        srcs.append(ii[keep])
        dsts.append(jj[keep])
    if not srcs:
        e = np.empty(0, dtype=np.int64)
        return e, e.copy()
    return (
        np.concatenate(srcs).astype(np.int64),
        np.concatenate(dsts).astype(np.int64),
    )


def _as_csr(indptr, indices, n):
    data = np.ones(indices.shape[0], dtype=np.float64)
    return sp.csr_matrix((data, indices, indptr), shape=(n, n))


def threshold_cascade(indptr, indices, seeds, thresholds, steps):
    """Run synchronous threshold adoption for ``steps`` rounds.

    A non-adopter adopts when its count of neighbors adopted as of the
    previous round reaches its threshold. Returns the uint8 adopted mask.
    """
    n = seeds.shape[0]
    adopted = seeds.astype(bool)
    a = _as_csr(indptr, indices, n)
    for _ in range(steps):
        counts = a @ adopted.astype(np.float64)
        new = (~adopted) & (counts >= thresholds)
        if not new.any():
            break
        adopted |= new
    return adopted.astype(np.uint8)


def hearing_exposure(indptr, indices, a, coeffs):
    """Accumulate sum_t coeffs[t-1] * (G^t a) without storing the powers."""
    n = a.shape[0]
    g = _as_csr(indptr, indices, n)
    out = np.zeros(n, dtype=np.float64)
    v = a.astype(np.float64)
    for c in coeffs:
        v = g @ v
        out += c * v
    return out


def adjacency_matvec(indptr, indices, x):
    n = x.shape[0]
    return _as_csr(indptr, indices, n) @ x.astype(np.float64)

# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled sampling and propagation kernels.

Same contract as ``_ref``: the dyad hash is shared, so both paths draw
identical graphs for identical seeds.
"""

import numpy as np

cimport numpy as cnp

cnp.import_array()

cdef unsigned long long GOLD = 0x9E3779B97F4A7C15ULL
cdef unsigned long long MIX1 = 0xFF51AFD7ED558CCDULL
cdef unsigned long long MIX2 = 0xC4CEB9FE1A85EC53ULL
cdef double U53 = 1.0 / 9007199254740992.0


cdef inline unsigned long long _fmix(unsigned long long z) nogil:
    z ^= z >> 33
    z *= MIX1
    z ^= z >> 33
    z *= MIX2
    z ^= z >> 33
    return z


cdef inline double _dyad_u01(unsigned long long h0, long long i, long long j) nogil:
    cdef unsigned long long h
    h = _fmix(h0 ^ ((<unsigned long long> (i + 1)) * GOLD))
    h = _fmix(h ^ ((<unsigned long long> (j + 1)) * GOLD))
    return <double> (h >> 11) * U53


cdef inline unsigned long long _seed_state(object seed):
    return _fmix((<unsigned long long> seed) + GOLD)


def dyad_u01(seed, i, j):
    """Uniform in [0, 1) for dyad (i, j), a pure function of (seed, i, j)."""
    return _dyad_u01(_seed_state(int(seed) & 0xFFFFFFFFFFFFFFFF), i, j)


def dyad_uniforms(seed, cnp.int64_t[::1] ii, cnp.int64_t[::1] jj):
    cdef Py_ssize_t m = ii.shape[0]
    cdef unsigned long long h0 = _seed_state(int(seed) & 0xFFFFFFFFFFFFFFFF)
    out_arr = np.empty(m, dtype=np.float64)
    cdef double[::1] out = out_arr
    cdef Py_ssize_t t
    for t in range(m):
        out[t] = _dyad_u01(h0, ii[t], jj[t])
    return out_arr


def sample_block_graph(seed, cnp.int64_t[::1] memberships, cnp.float64_t[:, ::1] probs):
    """Sample i<j edges of a block model; returns (src, dst) int64 arrays."""
    cdef Py_ssize_t n = memberships.shape[0]
    cdef unsigned long long h0 = _seed_state(int(seed) & 0xFFFFFFFFFFFFFFFF)
    cdef Py_ssize_t cap = 1024
    src_arr = np.empty(cap, dtype=np.int64)
    dst_arr = np.empty(cap, dtype=np.int64)
    cdef cnp.int64_t[::1] src = src_arr
    cdef cnp.int64_t[::1] dst = dst_arr
    cdef Py_ssize_t m = 0
    cdef Py_ssize_t i, j
    cdef long long ki
    for i in range(n - 1):
        ki = memberships[i]
        for j in range(i + 1, n):
            if _dyad_u01(h0, i, j) < probs[ki, memberships[j]]:
                if m == cap:
                    cap *= 2
                    src_arr = np.resize(src_arr, cap)
                    dst_arr = np.resize(dst_arr, cap)
                    src = src_arr
                    dst = dst_arr
                src[m] = i
                dst[m] = j
                m += 1
    return src_arr[:m].copy(), dst_arr[:m].copy()


def sample_product_graph(seed, cnp.float64_t[::1] nu):
    """Sample edges with P(i~j) = min(nu_i * nu_j, 1)."""
    cdef Py_ssize_t n = nu.shape[0]
    cdef unsigned long long h0 = _seed_state(int(seed) & 0xFFFFFFFFFFFFFFFF)
    cdef Py_ssize_t cap = 1024
    src_arr = np.empty(cap, dtype=np.int64)
    dst_arr = np.empty(cap, dtype=np.int64)
    cdef cnp.int64_t[::1] src = src_arr
    cdef cnp.int64_t[::1] dst = dst_arr
    cdef Py_ssize_t m = 0
    cdef Py_ssize_t i, j
    cdef double p
    for i in range(n - 1):
        for j in range(i + 1, n):
            p = nu[i] * nu[j]
            if p > 1.0:
                p = 1.0
            if _dyad_u01(h0, i, j) < p:
                if m == cap:
                    cap *= 2
                    src_arr = np.resize(src_arr, cap)
                    dst_arr = np.resize(dst_arr, cap)
                    src = src_arr
                    dst = dst_arr
                src[m] = i
                dst[m] = j
                m += 1
    return src_arr[:m].copy(), dst_arr[:m].copy()


def threshold_cascade(cnp.int64_t[::1] indptr, cnp.int64_t[::1] indices,
                      cnp.uint8_t[::1] seeds, cnp.float64_t[::1] thresholds,
                      int steps):
    """Run synchronous threshold adoption for ``steps`` rounds."""
    cdef Py_ssize_t n = seeds.shape[0]
    adopted_arr = np.array(seeds, dtype=np.uint8)
    new_arr = np.zeros(n, dtype=np.uint8)
    cdef cnp.uint8_t[::1] adopted = adopted_arr
    cdef cnp.uint8_t[::1] new = new_arr
    cdef Py_ssize_t i, ptr, step
    cdef long long c
    cdef bint any_new
    for step in range(steps):
        any_new = False
        for i in range(n):
            new[i] = 0
            if adopted[i]:
                continue
            c = 0
            for ptr in range(indptr[i], indptr[i + 1]):
                c += adopted[indices[ptr]]
            if (<double> c) >= thresholds[i]:
                new[i] = 1
                any_new = True
        if not any_new:
            break
        for i in range(n):
            if new[i]:
                adopted[i] = 1
    return adopted_arr


def hearing_exposure(cnp.int64_t[::1] indptr, cnp.int64_t[::1] indices,
                     cnp.float64_t[::1] a, cnp.float64_t[::1] coeffs):
    """Accumulate sum_t coeffs[t-1] * (G^t a) without storing the powers."""
    cdef Py_ssize_t n = a.shape[0]
    cdef Py_ssize_t T = coeffs.shape[0]
    out_arr = np.zeros(n, dtype=np.float64)
    v_arr = np.array(a, dtype=np.float64)
    nxt_arr = np.empty(n, dtype=np.float64)
    cdef cnp.float64_t[::1] out = out_arr
    cdef cnp.float64_t[::1] v = v_arr
    cdef cnp.float64_t[::1] nxt = nxt_arr
    cdef Py_ssize_t t, i, ptr
    cdef double s, c
    for t in range(T):
        c = coeffs[t]
        for i in range(n):
            s = 0.0
            for ptr in range(indptr[i], indptr[i + 1]):
                s += v[indices[ptr]]
            nxt[i] = s
        for i in range(n):
            v[i] = nxt[i]
            out[i] += c * v[i]
    return out_arr


def adjacency_matvec(cnp.int64_t[::1] indptr, cnp.int64_t[::1] indices,
                     cnp.float64_t[::1] x):
    cdef Py_ssize_t n = x.shape[0]
    out_arr = np.empty(n, dtype=np.float64)
    cdef cnp.float64_t[::1] out = out_arr
    cdef Py_ssize_t i, ptr
    cdef double s
    for i in range(n):
        s = 0.0
        for ptr in range(indptr[i], indptr[i + 1]):
            s += x[indices[ptr]]
        out[i] = s
    return out_arr

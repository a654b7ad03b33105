"""Graph container, generative network models, and adjacency-power products.

Graphs are undirected and simple, stored once as a symmetric CSR structure
with sorted neighbor lists. Samplers draw each dyad from a counter-based
stream keyed by (seed, i, j), so results do not depend on evaluation order
and identical seeds reproduce identical graphs.
"""

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from . import kernels
from ._rng import substream


class Graph:
    """Undirected simple graph on nodes 0..n-1 in symmetric CSR form.

    Parameters
    ----------
    n : int
        Number of nodes.
    indptr, indices : int64 arrays
        CSR row pointers and sorted column indices of the symmetric
        adjacency matrix.
    """

    __slots__ = ("n", "indptr", "indices", "_degrees")

    def __init__(self, n, indptr, indices):
        self.n = int(n)
        self.indptr = np.asarray(indptr, dtype=np.int64)
        self.indices = np.asarray(indices, dtype=np.int64)
        self._degrees = None

    @classmethod
    def from_edges(cls, n, src, dst):
        """Build from an i<j edge list. Rejects self loops and duplicates."""
        src = np.asarray(src, dtype=np.int64)
        dst = np.asarray(dst, dtype=np.int64)
        if src.shape != dst.shape:
            raise ValueError("edge endpoint arrays differ in length")
        if src.size and (min(src.min(), dst.min()) < 0 or max(src.max(), dst.max()) >= n):
            raise ValueError("edge endpoint out of range")
        if np.any(src == dst):
            raise ValueError("self loops are not allowed")
        lo = np.minimum(src, dst)
        hi = np.maximum(src, dst)
        key = lo * np.int64(n) + hi
        if np.unique(key).size != key.size:
            raise ValueError("duplicate edges are not allowed")
        both_src = np.concatenate([lo, hi])
        both_dst = np.concatenate([hi, lo])
        order = np.lexsort((both_dst, both_src))
        both_src = both_src[order]
        both_dst = both_dst[order]
        indptr = np.zeros(n + 1, dtype=np.int64)
        np.add.at(indptr, both_src + 1, 1)
        np.cumsum(indptr, out=indptr)
        return cls(n, indptr, both_dst)

    @property
    def degrees(self):
        if self._degrees is None:
            self._degrees = np.diff(self.indptr)
        return self._degrees

    @property
    def edge_count(self):
        return self.indices.shape[0] // 2

    def neighbors(self, i):
        return self.indices[self.indptr[i]:self.indptr[i + 1]]

    def has_edge(self, i, j):
        row = self.neighbors(i)
        pos = np.searchsorted(row, j)
        return pos < row.shape[0] and row[pos] == j

    def edges(self):
        """Upper-triangle (src, dst) arrays with src < dst."""
        src = np.repeat(np.arange(self.n, dtype=np.int64), self.degrees)
        dst = self.indices
        keep = src < dst
        return src[keep], dst[keep]

    def to_csr(self, dtype=np.float64):
        data = np.ones(self.indices.shape[0], dtype=dtype)
        return sp.csr_matrix((data, self.indices, self.indptr), shape=(self.n, self.n))

    def edge_key_set(self):
        src, dst = self.edges()
        return set(zip(src.tolist(), dst.tolist()))

    def __eq__(self, other):
        return (
            isinstance(other, Graph)
            and self.n == other.n
            and np.array_equal(self.indptr, other.indptr)
            and np.array_equal(self.indices, other.indices)
        )

    def __repr__(self):
        return f"Graph(n={self.n}, edges={self.edge_count})"


@dataclass
class SbmParams:
    """Stochastic block model: symmetric K x K edge probabilities plus a
    membership label in 0..K-1 for every node."""

    probs: np.ndarray
    memberships: np.ndarray

    def __post_init__(self):
        self.probs = np.asarray(self.probs, dtype=np.float64)
        self.memberships = np.asarray(self.memberships, dtype=np.int64)
        k = self.probs.shape[0]
        if self.probs.ndim != 2 or self.probs.shape != (k, k):
            raise ValueError("probs must be square")
        if not np.allclose(self.probs, self.probs.T):
            raise ValueError("probs must be symmetric")
        if np.any(self.probs < 0) or np.any(self.probs > 1):
            raise ValueError("probs entries must lie in [0, 1]")
        if self.memberships.size and (
            self.memberships.min() < 0 or self.memberships.max() >= k
        ):
            raise ValueError("membership label out of range")

    @property
    def n_blocks(self):
        return self.probs.shape[0]

    @property
    def n_nodes(self):
        return self.memberships.shape[0]

    def block_sizes(self):
        return np.bincount(self.memberships, minlength=self.n_blocks)

    def dyad_prob(self, ii, jj):
        return self.probs[self.memberships[ii], self.memberships[jj]]


@dataclass
class BetaParams:
    """Degree-heterogeneity model: P(i~j) = min(nu_i nu_j, 1)."""

    nu: np.ndarray

    def __post_init__(self):
        self.nu = np.asarray(self.nu, dtype=np.float64)
        if np.any(self.nu < 0) or not np.all(np.isfinite(self.nu)):
            raise ValueError("nu entries must be finite and nonnegative")

    @property
    def n_nodes(self):
        return self.nu.shape[0]

    def dyad_prob(self, ii, jj):
        return np.minimum(self.nu[ii] * self.nu[jj], 1.0)


def sample_sbm(params, rng_seed):
    """Draw one graph from a stochastic block model.

    Each unordered dyad is an independent Bernoulli with probability
    ``probs[k_i, k_j]``, drawn from the (seed, i, j) stream.
    """
    src, dst = kernels.sample_block_graph(
        substream(rng_seed), params.memberships, params.probs
    )
    return Graph.from_edges(params.n_nodes, src, dst)


def sample_beta_model(params, rng_seed):
    """Draw one graph with dyad probabilities min(nu_i nu_j, 1)."""
    src, dst = kernels.sample_product_graph(substream(rng_seed), params.nu)
    return Graph.from_edges(params.n_nodes, src, dst)


def sample_model(params, rng_seed):
    """Dispatch on the parameter type."""
    if isinstance(params, SbmParams):
        return sample_sbm(params, rng_seed)
    if isinstance(params, BetaParams):
        return sample_beta_model(params, rng_seed)
    raise TypeError(f"unsupported network model: {type(params).__name__}")


def matrix_power_apply(g, v, t):
    """Apply the t-th adjacency power to a vector (t = 0 is the identity).

    Integer inputs stay in int64 arithmetic, so counts are exact.
    """
    if t < 0:
        raise ValueError("power must be nonnegative")
    v = np.asarray(v)
    if v.shape != (g.n,):
        raise ValueError("vector length must match node count")
    if np.issubdtype(v.dtype, np.integer) or v.dtype == bool:
        a = g.to_csr(dtype=np.int64)
        out = v.astype(np.int64)
    else:
        a = g.to_csr()
        out = v.astype(np.float64)
    for _ in range(t):
        out = a @ out
    return out


def _modularity_gain(e_ab, deg_a, deg_b, two_m):
    return 2.0 * (e_ab / two_m - (deg_a * deg_b) / (two_m * two_m))


def detect_communities(g, k):
    """Greedy modularity agglomeration into exactly k groups.

    Starts from singletons and repeatedly merges the pair with the largest
    modularity gain, preferring the lexicographically smallest pair of
    cluster representatives on ties. Deterministic. Labels are assigned by
    each group's smallest member, 0..k-1.
    """
    n = g.n
    if not 1 <= k <= n:
        raise ValueError("k must be between 1 and the node count")
    if g.edge_count == 0:
        raise ValueError("modularity is undefined on an empty graph")
    two_m = 2.0 * g.edge_count

    members = {c: [c] for c in range(n)}
    deg = {c: float(g.degrees[c]) for c in range(n)}
    # cross-cluster edge counts, keyed by (min rep, max rep)
    cross = {}
    src, dst = g.edges()
    for a, b in zip(src.tolist(), dst.tolist()):
        cross[(a, b)] = cross.get((a, b), 0.0) + 1.0

    while len(members) > k:
        best = None
        best_gain = -np.inf
        for (a, b), e_ab in sorted(cross.items()):
            gain = _modularity_gain(e_ab, deg[a], deg[b], two_m)
            if gain > best_gain:
                best_gain = gain
                best = (a, b)
        if best is None:
            # forced merges across components: least negative gain first
            reps = sorted(members)
            for idx, a in enumerate(reps):
                for b in reps[idx + 1:]:
                    gain = _modularity_gain(0.0, deg[a], deg[b], two_m)
                    if gain > best_gain:
                        best_gain = gain
                        best = (a, b)
        a, b = best
        members[a].extend(members[b])
        deg[a] += deg[b]
        del members[b]
        del deg[b]
        cross.pop((a, b), None)
        # reroute b's remaining cross edges to a
        for pair in [p for p in cross if b in p]:
            other = pair[0] if pair[1] == b else pair[1]
            e = cross.pop(pair)
            key = (min(a, other), max(a, other))
            cross[key] = cross.get(key, 0.0) + e

    reps = sorted(members, key=lambda c: min(members[c]))
    labels = np.empty(n, dtype=np.int64)
    for label, c in enumerate(reps):
        labels[list(members[c])] = label
    return labels

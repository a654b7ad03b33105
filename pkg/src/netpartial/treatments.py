"""Treatment randomization designs.

Each design draws assignment vectors and knows the probability that a node
together with its whole neighborhood lands fully treated or fully
untreated, which is what reweighting estimators divide by. Cluster-level
draws are keyed by cluster content, not label, so relabeling clusters never
changes a realized assignment.
"""

import math
from dataclasses import dataclass

import numpy as np

from ._rng import generator, stable_key, substream
from .errors import PositivityError
from .kernels import dyad_uniforms


def _cluster_members(labels):
    labels = np.asarray(labels, dtype=np.int64)
    return [np.flatnonzero(labels == c) for c in range(labels.max() + 1)]


def _neighborhood_cluster_counts(g, labels):
    """For each node: how many of its closed-neighborhood members fall in
    each cluster (sparse dict per node)."""
    labels = np.asarray(labels, dtype=np.int64)
    out = []
    for i in range(g.n):
        closed = np.append(g.neighbors(i), i)
        counts = {}
        for c in labels[closed]:
            counts[int(c)] = counts.get(int(c), 0) + 1
        out.append(counts)
    return out


@dataclass(frozen=True)
class BernoulliDesign:
    """Independent node-level coin flips with probability p."""

    p: float

    def __post_init__(self):
        if not 0 < self.p < 1:
            raise ValueError("p must lie strictly between 0 and 1")

    def sample(self, n, rng_seed):
        ii = np.arange(n, dtype=np.int64)
        u = dyad_uniforms(substream(rng_seed, 41), ii, ii)
        return (u < self.p).astype(np.int64)

    def exposure_probs(self, g):
        sizes = g.degrees + 1
        return self.p**sizes, (1.0 - self.p) ** sizes


@dataclass(frozen=True)
class ClusterDesign:
    """All-or-nothing cluster randomization: a uniform subset of
    ``n_treated`` clusters is fully treated."""

    clusters: tuple
    n_treated: int

    def labels(self):
        return np.asarray(self.clusters, dtype=np.int64)

    def _parts(self):
        members = _cluster_members(self.labels())
        if any(m.size == 0 for m in members):
            raise ValueError("cluster labels must be contiguous and nonempty")
        if not 0 < self.n_treated < len(members):
            raise ValueError("treated cluster count out of range")
        return members

    def sample(self, n, rng_seed):
        members = self._parts()
        labels = self.labels()
        if labels.shape[0] != n:
            raise ValueError("cluster labels must cover all nodes")
        # content-keyed uniforms; the n_treated smallest win
        u = [
            generator(rng_seed, 42, stable_key(m)).random()
            for m in members
        ]
        treated = np.argsort(u, kind="stable")[: self.n_treated]
        a = np.zeros(n, dtype=np.int64)
        for c in treated:
            a[members[c]] = 1
        return a

    def exposure_probs(self, g):
        members = self._parts()
        j = len(members)
        labels = self.labels()
        touch = _neighborhood_cluster_counts(g, labels)
        c_i = np.array([len(t) for t in touch])
        total = math.comb(j, self.n_treated)
        p1 = np.array(
            [
                math.comb(j - c, self.n_treated - c) / total if c <= self.n_treated else 0.0
                for c in c_i
            ]
        )
        n_ctrl = j - self.n_treated
        p0 = np.array(
            [math.comb(j - c, n_ctrl - c) / total if c <= n_ctrl else 0.0 for c in c_i]
        )
        return p1, p0


def round_half_up(x):
    return int(math.floor(x + 0.5))


@dataclass(frozen=True)
class SaturationDesign:
    """Within-cluster randomization at fixed saturations.

    Cluster j treats round-half-up(tau_j * n_j) members, chosen uniformly
    without replacement, independently across clusters.
    """

    clusters: tuple
    tau: tuple

    def labels(self):
        return np.asarray(self.clusters, dtype=np.int64)

    def saturations(self):
        t = np.asarray(self.tau, dtype=np.float64)
        if np.any(t < 0) or np.any(t > 1):
            raise ValueError("saturations must lie in [0, 1]")
        return t

    def _parts(self):
        members = _cluster_members(self.labels())
        if any(m.size == 0 for m in members):
            raise ValueError("cluster labels must be contiguous and nonempty")
        if len(members) != len(self.tau):
            raise ValueError("one saturation per cluster required")
        return members

    def treated_counts(self):
        members = self._parts()
        tau = self.saturations()
        return [round_half_up(t * m.size) for t, m in zip(tau, members)]

    def sample(self, n, rng_seed):
        members = self._parts()
        counts = self.treated_counts()
        a = np.zeros(n, dtype=np.int64)
        for m, c in zip(members, counts):
            if c == 0:
                continue
            rng = generator(rng_seed, 43, stable_key(m))
            a[rng.choice(m, size=c, replace=False)] = 1
        return a

    def exposure_probs(self, g):
        members = self._parts()
        counts = self.treated_counts()
        labels = self.labels()
        touch = _neighborhood_cluster_counts(g, labels)
        p1 = np.ones(g.n)
        p0 = np.ones(g.n)
        for i, per_cluster in enumerate(touch):
            for c, s in per_cluster.items():
                n_c = members[c].size
                m_c = counts[c]
                denom1 = math.comb(n_c, m_c)
                p1[i] *= math.comb(n_c - s, m_c - s) / denom1 if m_c >= s else 0.0
                p0[i] *= math.comb(n_c - s, m_c) / denom1 if n_c - m_c >= s else 0.0
        return p1, p0


def check_positivity(p1, p0):
    if np.any(p1 <= 0) or np.any(p0 <= 0):
        raise PositivityError("positivity violation: zero exposure probability")

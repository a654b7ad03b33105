"""Partial network observation: trait counts, induced subgraphs, link-traced
samples, and independently masked edge sets.

Each generator consumes a fully observed graph and returns the reduced data
an analyst would actually hold, together with whatever bookkeeping later
estimation needs (boundary rows, observation propensities).
"""

import warnings
from dataclasses import dataclass, field

import numpy as np

from . import kernels
from ._rng import generator, substream
from .graphs import Graph

_EMPTY_PAIRS = np.empty((0, 2), dtype=np.int64)


def validate_traits(traits, n=None):
    """Check a binary trait matrix; returns it as int64."""
    traits = np.asarray(traits)
    if traits.ndim != 2:
        raise ValueError("traits must be a 2-d matrix")
    if n is not None and traits.shape[0] != n:
        raise ValueError("trait matrix row count must match node count")
    if not np.isin(traits, (0, 1)).all():
        raise ValueError("traits must be binary")
    return traits.astype(np.int64)


def split_traits(memberships, per_block):
    """Exclusive traits refining block labels: block k is split into
    ``per_block`` trait groups round-robin by node order."""
    memberships = np.asarray(memberships, dtype=np.int64)
    n = memberships.shape[0]
    n_blocks = memberships.max() + 1 if n else 0
    labels = np.empty(n, dtype=np.int64)
    for k in range(n_blocks):
        idx = np.flatnonzero(memberships == k)
        labels[idx] = k * per_block + np.arange(idx.size) % per_block
    t = n_blocks * per_block
    traits = np.zeros((n, t), dtype=np.int64)
    traits[np.arange(n), labels] = 1
    return traits


def overlapping_traits(memberships, block_trait_probs, rng_seed):
    """Non-exclusive traits: node i holds trait t with probability
    ``block_trait_probs[k_i, t]``, independently."""
    memberships = np.asarray(memberships, dtype=np.int64)
    q = np.asarray(block_trait_probs, dtype=np.float64)
    rng = generator(rng_seed, 71)
    u = rng.random((memberships.shape[0], q.shape[1]))
    return (u < q[memberships]).astype(np.int64)


def ard_from_graph(g, traits):
    """Aggregated relational counts: entry (i, t) is the number of i's
    neighbors holding trait t. Self is never counted."""
    traits = validate_traits(traits, g.n)
    a = g.to_csr(dtype=np.int64)
    return np.asarray(a @ traits)


@dataclass
class ArdMatrix:
    """ARD counts with the trait assignment they were tallied against."""

    counts: np.ndarray
    traits: np.ndarray

    def __post_init__(self):
        self.counts = np.asarray(self.counts, dtype=np.int64)
        self.traits = validate_traits(self.traits, self.counts.shape[0])
        if self.counts.shape != self.traits.shape:
            raise ValueError("counts and traits shapes differ")
        if np.any(self.counts < 0):
            raise ValueError("counts must be nonnegative")

    @property
    def n_nodes(self):
        return self.counts.shape[0]

    @property
    def n_traits(self):
        return self.counts.shape[1]

    def trait_counts(self):
        return self.traits.sum(axis=0)


def ard_of(g, traits):
    traits = validate_traits(traits, g.n)
    return ArdMatrix(ard_from_graph(g, traits), traits)


@dataclass
class SubgraphSample:
    """Partially observed network data.

    ``kind`` fixes which dyads count as observed:

    - ``induced``: every pair within ``nodes``;
    - ``rds``: every pair with at least one recruited endpoint (recruited
      rows are fully observed, cross edges stored in ``boundary``);
    - ``mask``: retained edges only, with per-edge observation
      propensities; absent dyads are ambiguous.
    """

    kind: str
    n: int
    nodes: np.ndarray
    edges: np.ndarray
    boundary: np.ndarray = field(default_factory=lambda: _EMPTY_PAIRS.copy())
    propensities: np.ndarray = None
    propensity_fn: object = None

    def __post_init__(self):
        if self.kind not in ("induced", "rds", "mask"):
            raise ValueError(f"unknown sample kind: {self.kind!r}")
        self.nodes = np.asarray(self.nodes, dtype=np.int64)
        self.edges = np.asarray(self.edges, dtype=np.int64).reshape(-1, 2)
        self.boundary = np.asarray(self.boundary, dtype=np.int64).reshape(-1, 2)
        if self.propensities is not None:
            self.propensities = np.asarray(self.propensities, dtype=np.float64)
            if self.propensities.shape[0] != self.edges.shape[0]:
                raise ValueError("one propensity per observed edge required")

    @property
    def m(self):
        return self.nodes.shape[0]

    def node_mask(self):
        mask = np.zeros(self.n, dtype=bool)
        mask[self.nodes] = True
        return mask

    def induced_graph(self):
        """Observed graph on ``nodes`` relabeled to 0..m-1."""
        pos = -np.ones(self.n, dtype=np.int64)
        pos[self.nodes] = np.arange(self.m)
        src, dst = self.edges[:, 0], self.edges[:, 1]
        return Graph.from_edges(self.m, pos[src], pos[dst])


def sample_induced_subgraph(g, m, memberships, rng_seed, max_tries=1000):
    """Uniform m-node sample conditioned on covering every block.

    Rejection-samples uniform subsets until each block label appears. If the
    coverage event is too rare to hit within ``max_tries`` draws, falls back
    to one stratified draw (one forced node per block, remainder uniform)
    and warns, since that fallback is not exactly the conditional law.
    """
    memberships = np.asarray(memberships, dtype=np.int64)
    n_blocks = memberships.max() + 1
    if m < n_blocks:
        raise ValueError("m is smaller than the number of blocks")
    if m > g.n:
        raise ValueError("m exceeds the node count")
    rng = generator(rng_seed, 11)
    nodes = None
    for _ in range(max_tries):
        cand = rng.choice(g.n, size=m, replace=False)
        if np.unique(memberships[cand]).size == n_blocks:
            nodes = np.sort(cand)
            break
    if nodes is None:
        warnings.warn("block coverage too rare; using stratified fallback")
        forced = np.array(
            [rng.choice(np.flatnonzero(memberships == k)) for k in range(n_blocks)]
        )
        rest = np.setdiff1d(np.arange(g.n), forced)
        extra = rng.choice(rest, size=m - n_blocks, replace=False)
        nodes = np.sort(np.concatenate([forced, extra]))
    inside = np.zeros(g.n, dtype=bool)
    inside[nodes] = True
    src, dst = g.edges()
    keep = inside[src] & inside[dst]
    edges = np.column_stack([src[keep], dst[keep]])
    return SubgraphSample("induced", g.n, nodes, edges)


def sample_rds(g, seeds, coupons, max_m, rng_seed):
    """Link-traced (respondent-driven) sample.

    Recruitment runs breadth-first from the seed list: each recruit refers
    up to ``coupons`` uniformly chosen unrecruited neighbors, until ``max_m``
    nodes are recruited or the queue drains. ``seeds`` may be an explicit
    node list or an integer count to draw uniformly. Full adjacency rows of
    recruited nodes are observed; edges leaving the recruited set go to
    ``boundary``.
    """
    rng = generator(rng_seed, 12)
    if np.isscalar(seeds):
        seeds = np.sort(rng.choice(g.n, size=int(seeds), replace=False))
    seeds = np.asarray(seeds, dtype=np.int64)
    if seeds.size == 0:
        raise ValueError("at least one seed required")
    if coupons < 1:
        raise ValueError("coupons must be positive")
    recruited = np.zeros(g.n, dtype=bool)
    order = []
    queue = []
    for s in seeds:
        if len(order) >= max_m:
            break
        if not recruited[s]:
            recruited[s] = True
            order.append(int(s))
            queue.append(int(s))
    head = 0
    while head < len(queue) and len(order) < max_m:
        i = queue[head]
        head += 1
        fresh = [int(j) for j in g.neighbors(i) if not recruited[j]]
        if not fresh:
            continue
        take = min(coupons, len(fresh), max_m - len(order))
        picked = rng.choice(fresh, size=take, replace=False)
        for j in sorted(int(v) for v in picked):
            recruited[j] = True
            order.append(j)
            queue.append(j)
    nodes = np.sort(np.array(order, dtype=np.int64))
    src, dst = g.edges()
    both = recruited[src] & recruited[dst]
    one = recruited[src] ^ recruited[dst]
    edges = np.column_stack([src[both], dst[both]])
    bsrc = np.where(recruited[src[one]], src[one], dst[one])
    bdst = np.where(recruited[src[one]], dst[one], src[one])
    boundary = np.column_stack([bsrc, bdst])
    return SubgraphSample("rds", g.n, nodes, edges, boundary=boundary)


def mask_edges(g, propensity, rng_seed):
    """Retain each true edge independently with its observation propensity.

    ``propensity`` is a constant in (0, 1] or a callable (i, j) -> prob.
    Retention coins come from the (seed, i, j) dyad stream. Realized
    propensities are stored per retained edge for inverse-probability
    reweighting.
    """
    src, dst = g.edges()
    if callable(propensity):
        p = np.array([propensity(int(i), int(j)) for i, j in zip(src, dst)], dtype=np.float64)
        fn = propensity
    else:
        p = np.full(src.shape[0], float(propensity))
        const = float(propensity)
        fn = lambda i, j: const
    if np.any(p <= 0) or np.any(p > 1):
        raise ValueError("propensities must lie in (0, 1]")
    u = kernels.dyad_uniforms(substream(rng_seed, 13), src, dst)
    keep = u < p
    edges = np.column_stack([src[keep], dst[keep]])
    return SubgraphSample(
        "mask",
        g.n,
        np.arange(g.n, dtype=np.int64),
        edges,
        propensities=p[keep],
        propensity_fn=fn,
    )

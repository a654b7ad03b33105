"""Network model estimation from partial data.

Recovers stochastic block model parameters from aggregated relational
counts, induced or masked subsamples, and link-traced samples, and fits the
degree-heterogeneity model from a degree sequence. The ARD pipeline runs
clustering, trait mixing, and a symmetric box-constrained least squares
solve; a parametric bootstrap rewires the whole pipeline for uncertainty.
"""

import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import linear_sum_assignment
from scipy.spatial.distance import cdist

from ._rng import substream
from .errors import NumericalError
from .graphs import SbmParams, sample_sbm
from .partial import ArdMatrix, ard_of, validate_traits

# conditioning cap on the trait-mixing normal matrix
MIX_COND_CAP = 1e6


@dataclass
class NetModelEstimate:
    """Estimated network model plus fit diagnostics.

    ``kind`` is "sbm" (``probs`` K x K, ``memberships`` length n) or "beta"
    (``nu`` length n). ``trait_rates`` keeps the estimated trait-by-block
    contact rates for label alignment across bootstrap replicates.
    """

    kind: str
    probs: np.ndarray = None
    memberships: np.ndarray = None
    nu: np.ndarray = None
    diagnostics: dict = field(default_factory=dict)
    trait_rates: np.ndarray = None

    @property
    def n_blocks(self):
        return self.probs.shape[0] if self.probs is not None else 0

    def to_sbm_params(self):
        return SbmParams(np.clip(self.probs, 0.0, 1.0), self.memberships)


def normalize_ard(ard):
    """Scale trait columns by group size: entry (i, t) becomes the count of
    i's trait-t neighbors divided by n_t."""
    counts = ard.trait_counts()
    if np.any(counts == 0):
        raise ValueError("every trait group must be nonempty")
    return ard.counts / counts[None, :]


def _agglomerate(points, k):
    """Average-linkage agglomeration on Euclidean distances, cut at k.

    Merge order is fully deterministic: among minimum-distance pairs the
    lexicographically smallest (i, j) wins. Row-minimum caching keeps the
    scan cost near O(n^2) overall.
    """
    n = points.shape[0]
    if not 1 <= k <= n:
        raise ValueError("cluster count out of range")
    d = cdist(points, points)
    np.fill_diagonal(d, np.inf)
    size = np.ones(n)
    alive = np.ones(n, dtype=bool)
    members = {i: [i] for i in range(n)}
    # rmin[i] = min over alive j > i, rarg[i] = smallest such argmin
    rmin = np.full(n, np.inf)
    rarg = np.full(n, -1, dtype=np.int64)

    def refresh(i):
        row = d[i, i + 1:]
        if row.size == 0 or not np.isfinite(row).any():
            rmin[i] = np.inf
            rarg[i] = -1
        else:
            pos = int(np.argmin(row))
            rmin[i] = row[pos]
            rarg[i] = i + 1 + pos

    for i in range(n):
        refresh(i)

    for _ in range(n - k):
        i = int(np.argmin(rmin))
        j = int(rarg[i])
        # average-linkage update of cluster i, drop cluster j
        wi, wj = size[i], size[j]
        merged = (wi * d[i, :] + wj * d[j, :]) / (wi + wj)
        d[i, :] = merged
        d[:, i] = merged
        d[i, i] = np.inf
        d[j, :] = np.inf
        d[:, j] = np.inf
        size[i] = wi + wj
        alive[j] = False
        members[i].extend(members.pop(j))
        rmin[j] = np.inf
        rarg[j] = -1
        refresh(i)
        stale = np.flatnonzero(alive[:j] & ((rarg[:j] == i) | (rarg[:j] == j)))
        for x in stale:
            if x != i:
                refresh(int(x))
        # rows x < i whose new distance to i matches or beats their cache
        cand = np.flatnonzero(alive[:i] & (d[:i, i] <= rmin[:i]))
        for x in cand:
            if d[x, i] < rmin[x] or i < rarg[x]:
                rmin[x] = d[x, i]
                rarg[x] = i

    reps = sorted(members, key=lambda c: min(members[c]))
    labels = np.empty(n, dtype=np.int64)
    for label, c in enumerate(reps):
        labels[members[c]] = label
    return labels


def cluster_ard(ard, k):
    """Cluster nodes into k blocks from size-normalized ARD rows."""
    return _agglomerate(normalize_ard(ard), k)


def trait_block_fractions(traits, memberships, k):
    """Mixing matrix: entry (t, b) is the fraction of trait-t holders that
    sit in block b. Columns of the trait-by-block system."""
    traits = validate_traits(traits)
    counts = traits.sum(axis=0)
    if np.any(counts == 0):
        raise ValueError("every trait group must be nonempty")
    onehot = np.zeros((memberships.shape[0], k))
    onehot[np.arange(memberships.shape[0]), memberships] = 1.0
    return (traits.T @ onehot) / counts[:, None]


def trait_block_rates(ard, memberships, k):
    """Empirical trait-by-block contact rates: entry (t, b) averages the
    trait-t counts of block-b nodes and scales by the trait group size."""
    counts = ard.trait_counts()
    if np.any(counts == 0):
        raise ValueError("every trait group must be nonempty")
    block_sizes = np.bincount(memberships, minlength=k)
    if np.any(block_sizes == 0):
        raise NumericalError("empty block in clustering")
    onehot = np.zeros((memberships.shape[0], k))
    onehot[np.arange(memberships.shape[0]), memberships] = 1.0
    block_sums = ard.counts.T @ onehot  # T x K
    return block_sums / block_sizes[None, :] / counts[:, None]


def _project_box_symmetric(p):
    p = 0.5 * (p + p.T)
    return np.clip(p, 0.0, 1.0)


def solve_block_probs(mix, rates, weights=None, tol=1e-9, max_iters=20000):
    """Symmetric box-constrained least squares for the block contact matrix.

    Minimizes the column-weighted residual of ``mix @ P`` against ``rates``
    over symmetric P with entries in [0, 1], by projected gradient from the
    clipped unconstrained solution. Steps shrink when a step fails to
    descend; iteration stops once the relative objective change drops below
    ``tol``. Returns (P, info dict).
    """
    mix = np.asarray(mix, dtype=np.float64)
    rates = np.asarray(rates, dtype=np.float64)
    t, k = mix.shape
    if rates.shape != (t, k):
        raise ValueError("rates shape must match the mixing matrix")
    if t < k:
        raise ValueError("need at least as many traits as blocks")
    gram = mix.T @ mix
    sv = np.linalg.svd(gram, compute_uv=False)
    cond = np.inf if sv[-1] == 0 else sv[0] / sv[-1]
    if cond > MIX_COND_CAP:
        raise NumericalError("ill-conditioned trait design")
    if weights is None:
        w = np.ones(k)
    else:
        w = np.asarray(weights, dtype=np.float64)
        w = w / w.max()

    def objective(p):
        r = (mix @ p - rates) * np.sqrt(w)[None, :]
        return 0.5 * float((r * r).sum())

    p = _project_box_symmetric(np.linalg.solve(gram, mix.T @ rates))
    step = 1.0 / (sv[0] * w.max())
    f = objective(p)
    iters = 0
    converged = False
    for iters in range(1, max_iters + 1):
        grad = mix.T @ ((mix @ p - rates) * w[None, :])
        cand = _project_box_symmetric(p - step * grad)
        fc = objective(cand)
        if fc > f:
            step *= 0.5
            if step < 1e-18:
                converged = True
                break
            continue
        moved = abs(f - fc)
        p, f = cand, fc
        if moved <= tol * max(f, np.finfo(float).tiny):
            converged = True
            break
    return p, {"objective": f, "iterations": iters, "converged": converged, "cond": cond}


def estimate_sbm_from_ard(ard, k, constrained=True):
    """Full ARD pipeline: cluster, mix, solve; returns a block model fit.

    With ``constrained=False`` the raw normal-equation solution is clipped
    and symmetrized instead of running the constrained solver.
    """
    memberships = cluster_ard(ard, k)
    mix = trait_block_fractions(ard.traits, memberships, k)
    rates = trait_block_rates(ard, memberships, k)
    sizes = np.bincount(memberships, minlength=k)
    if constrained:
        probs, info = solve_block_probs(mix, rates, weights=sizes)
    else:
        gram = mix.T @ mix
        sv = np.linalg.svd(gram, compute_uv=False)
        cond = np.inf if sv[-1] == 0 else sv[0] / sv[-1]
        if cond > MIX_COND_CAP:
            raise NumericalError("ill-conditioned trait design")
        probs = _project_box_symmetric(np.linalg.solve(gram, mix.T @ rates))
        info = {"objective": None, "iterations": 0, "converged": True, "cond": cond}
    return NetModelEstimate(
        kind="sbm",
        probs=probs,
        memberships=memberships,
        diagnostics={
            "cond": info["cond"],
            "cluster_sizes": sizes.tolist(),
            "converged": bool(info["converged"]),
        },
        trait_rates=rates,
    )


def estimate_sbm_from_subgraph(sample, memberships, k):
    """Dyad-frequency block estimates from an induced or masked sample.

    For an induced sample, each block-pair estimate is the edge frequency
    over sampled dyads. For a masked sample, retained edges are weighted by
    inverse observation propensity and the estimate is clipped to [0, 1].
    Every block pair must contribute at least one dyad.
    """
    memberships = np.asarray(memberships, dtype=np.int64)
    if sample.kind == "rds":
        raise ValueError("use estimate_sbm_from_rds for link-traced samples")
    nodes = sample.nodes
    labs = memberships[nodes]
    counts = np.bincount(labs, minlength=k).astype(np.float64)
    # dyad counts per block pair among observed nodes
    pair_total = np.outer(counts, counts)
    np.fill_diagonal(pair_total, counts * (counts - 1) / 2.0)
    if np.any(pair_total <= 0):
        raise NumericalError("a block pair has no sampled dyads")
    src, dst = sample.edges[:, 0], sample.edges[:, 1]
    if sample.kind == "mask":
        wts = 1.0 / sample.propensities
    else:
        wts = np.ones(src.shape[0])
    bi, bj = memberships[src], memberships[dst]
    num = np.zeros((k, k))
    np.add.at(num, (np.minimum(bi, bj), np.maximum(bi, bj)), wts)
    num = num + np.triu(num, 1).T
    probs = num / pair_total
    probs = np.clip(0.5 * (probs + probs.T), 0.0, 1.0)
    return NetModelEstimate(
        kind="sbm",
        probs=probs,
        memberships=memberships,
        diagnostics={"cluster_sizes": np.bincount(labs, minlength=k).tolist()},
    )


def estimate_sbm_from_rds(sample, memberships, k):
    """Pairwise contact frequencies within a link-traced sample.

    Off-diagonal entries divide cross-type edge counts by the number of
    ordered cross pairs; diagonal entries divide twice the within-type edge
    count by M_k (M_k - 1).
    """
    memberships = np.asarray(memberships, dtype=np.int64)
    if sample.kind != "rds":
        raise ValueError("expected a link-traced sample")
    labs = memberships[sample.nodes]
    m_k = np.bincount(labs, minlength=k).astype(np.float64)
    denom = np.outer(m_k, m_k)
    np.fill_diagonal(denom, m_k * (m_k - 1.0))
    if np.any(denom <= 0):
        raise NumericalError("a block pair has no recruited pairs")
    src, dst = sample.edges[:, 0], sample.edges[:, 1]
    num = np.zeros((k, k))
    np.add.at(num, (memberships[src], memberships[dst]), 1.0)
    np.add.at(num, (memberships[dst], memberships[src]), 1.0)
    # num[k,k] now counts ordered within pairs, num[k,k'] ordered cross pairs
    probs = np.clip(num / denom, 0.0, 1.0)
    return NetModelEstimate(
        kind="sbm",
        probs=probs,
        memberships=memberships,
        diagnostics={"cluster_sizes": m_k.astype(int).tolist()},
    )


def fit_beta_model(degrees, n=None, tol=1e-10, max_iters=10000):
    """Fit degree parameters by the moment fixed point.

    Starting from nu_i = sqrt(d_i / (n - 1)), iterates
    nu_i <- d_i / (sum(nu) - nu_i) until the largest update falls below
    ``tol``. Zero degrees are rejected. Returns a "beta" estimate with a
    convergence flag.
    """
    degrees = np.asarray(degrees, dtype=np.float64)
    if n is None:
        n = degrees.shape[0]
    if degrees.shape[0] != n:
        raise ValueError("degree sequence length mismatch")
    if np.any(degrees < 1):
        raise ValueError("all degrees must be at least 1")
    nu = np.sqrt(degrees / (n - 1))
    converged = False
    iters = 0
    for iters in range(1, max_iters + 1):
        total = nu.sum()
        new = degrees / (total - nu)
        delta = np.abs(new - nu).max()
        nu = new
        if delta <= tol:
            converged = True
            break
    return NetModelEstimate(
        kind="beta",
        nu=nu,
        diagnostics={"converged": converged, "iterations": iters},
    )


@dataclass
class BootstrapResult:
    estimates: list
    n_failed: int


def _align_to(reference, estimate):
    """Permute an estimate's block labels to match the reference, by
    minimum-cost matching of trait-rate columns."""
    k = reference.n_blocks
    cost = cdist(estimate.trait_rates.T, reference.trait_rates.T, "sqeuclidean")
    rows, cols = linear_sum_assignment(cost)
    perm = np.empty(k, dtype=np.int64)  # perm[old block] = new label
    perm[rows] = cols
    order = np.argsort(perm)  # new label -> old block
    estimate.probs = estimate.probs[np.ix_(order, order)]
    estimate.trait_rates = estimate.trait_rates[:, order]
    estimate.memberships = perm[estimate.memberships]
    sizes = estimate.diagnostics.get("cluster_sizes")
    if sizes is not None:
        estimate.diagnostics["cluster_sizes"] = [sizes[i] for i in order]
    return estimate


def bootstrap_ard(estimate, traits, b, rng_seed, constrained=True):
    """Parametric bootstrap of the ARD pipeline.

    Each replicate redraws a graph from the fitted block model, rebuilds
    ARD under the fixed trait assignment, reruns clustering and estimation,
    and aligns replicate block labels back to the fitted model. Replicates
    that fail numerically are dropped and counted.
    """
    if estimate.kind != "sbm":
        raise ValueError("bootstrap requires a block model estimate")
    traits = validate_traits(traits, estimate.memberships.shape[0])
    k = estimate.n_blocks
    params = estimate.to_sbm_params()
    out = []
    failed = 0
    for rep in range(b):
        g = sample_sbm(params, substream(rng_seed, 21, rep))
        try:
            fit = estimate_sbm_from_ard(ard_of(g, traits), k, constrained=constrained)
            out.append(_align_to(estimate, fit))
        except NumericalError:
            failed += 1
    if failed:
        warnings.warn(f"{failed} of {b} bootstrap replicates failed")
    return BootstrapResult(out, failed)

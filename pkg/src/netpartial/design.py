"""Experiment design on an estimated network model.

Evaluates the sampling variance of saturation-randomized designs by Monte
Carlo, searches the saturation space with a Gaussian-process surrogate,
and solves two allocation problems (diffusion seeding, budgeted treatment
under a linear spillover response) that are tractable exactly.
"""

import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import cho_solve, cholesky
from scipy.spatial.distance import cdist
from scipy.special import expit
from scipy.stats import qmc

from ._rng import generator, stable_key, substream
from .errors import NumericalError
from .inference import DESIGN_COND_CAP, _cond, draw_graphs, features_on
from .outcomes import simulate_outcomes
from .treatments import SaturationDesign

JITTER_LADDER = tuple(10.0**e for e in range(-10, -3))


def _as_model(theta):
    """Accept either raw model parameters or a fitted estimate."""
    if hasattr(theta, "dyad_prob"):
        return theta
    if hasattr(theta, "to_sbm_params"):
        return theta.to_sbm_params()
    raise TypeError(f"not a network model: {type(theta).__name__}")


@dataclass(frozen=True)
class DesignClusters:
    """Partition of nodes into design clusters plus the feasible set of
    saturation vectors: an explicit grid, or the unit box optionally cut
    by a treated-count budget sum_j tau_j n_j <= budget."""

    labels: tuple
    grid: tuple = None
    budget: float = None

    def __post_init__(self):
        lab = np.asarray(self.labels, dtype=np.int64)
        if lab.size == 0:
            raise ValueError("empty cluster assignment")
        j = int(lab.max()) + 1
        if lab.min() < 0 or len(np.unique(lab)) != j:
            raise ValueError("cluster labels must be contiguous from 0")
        if self.grid is not None:
            if len(self.grid) == 0:
                raise ValueError("empty saturation grid")
            for t in self.grid:
                t = np.asarray(t, dtype=np.float64)
                if t.shape != (j,) or t.min() < 0 or t.max() > 1:
                    raise ValueError("grid points must lie in the unit box")
            if not any(self._within_budget(t) for t in self.grid):
                raise ValueError("budget excludes every grid point")
        if self.budget is not None and self.budget <= 0:
            raise ValueError("budget must be positive")

    @property
    def n_clusters(self):
        return int(np.asarray(self.labels).max()) + 1

    @property
    def sizes(self):
        return np.bincount(np.asarray(self.labels, dtype=np.int64), minlength=self.n_clusters)

    def members(self):
        lab = np.asarray(self.labels, dtype=np.int64)
        return [np.flatnonzero(lab == c) for c in range(self.n_clusters)]

    def _within_budget(self, tau):
        if self.budget is None:
            return True
        return float(np.asarray(tau) @ self.sizes) <= self.budget + 1e-9

    def feasible_grid(self):
        if self.grid is None:
            return None
        return [np.asarray(t, dtype=np.float64) for t in self.grid if self._within_budget(t)]

    def sample_uniform(self, rng):
        grid = self.feasible_grid()
        if grid is not None:
            return grid[rng.integers(len(grid))]
        for _ in range(1000):
            tau = rng.random(self.n_clusters)
            if self._within_budget(tau):
                return tau
        # budget so tight that rejection stalls; scale into the simplex
        tau = rng.random(self.n_clusters)
        return tau * (self.budget / float(tau @ self.sizes))

    def candidates(self, count, rng_seed):
        """Quasi-random feasible saturation vectors (the whole grid when
        the feasible set is a grid)."""
        grid = self.feasible_grid()
        if grid is not None:
            return np.asarray(grid)
        sob = qmc.Sobol(d=self.n_clusters, scramble=True, seed=generator(rng_seed))
        pts = sob.random(count)
        keep = np.array([self._within_budget(t) for t in pts])
        if keep.any():
            return pts[keep]
        rng = generator(rng_seed, 1)
        return np.asarray([self.sample_uniform(rng) for _ in range(count)])


@dataclass(frozen=True)
class NoiseCov:
    """Working model of the outcome noise covariance: independent with a
    common variance, or equicorrelated within design clusters."""

    kind: str = "independent"
    variance: float = 1.0
    rho: float = 0.0

    def __post_init__(self):
        if self.kind not in ("independent", "cluster"):
            raise ValueError(f"unknown noise covariance: {self.kind!r}")
        if self.variance < 0:
            raise ValueError("variance must be nonnegative")
        if not 0 <= self.rho < 1:
            raise ValueError("within-cluster correlation must lie in [0, 1)")

    def quad(self, h, labels):
        """(1/n^2) H' Sigma H without forming the n x n Sigma."""
        n = h.shape[0]
        base = h.T @ h
        if self.kind == "independent" or self.rho == 0.0:
            return self.variance * base / (n * n)
        labels = np.asarray(labels, dtype=np.int64)
        sums = np.zeros((labels.max() + 1, h.shape[1]))
        np.add.at(sums, labels, h)
        return self.variance * ((1.0 - self.rho) * base + self.rho * (sums.T @ sums)) / (n * n)


def _resolve_penalties(values, penalty):
    """Replace singular-draw markers by the penalty rule; error only when
    nothing finite exists and no penalty was configured."""
    values = np.asarray(values, dtype=np.float64)
    bad = np.isnan(values)
    if not bad.any():
        return values
    if bad.all():
        if penalty is None:
            raise NumericalError("degenerate design")
        return np.full(values.shape, float(penalty))
    fill = float(penalty) if penalty is not None else 10.0 * values[~bad].max()
    values[bad] = fill
    return values


def eval_saturation_variance(
    tau,
    clusters,
    theta,
    gstar,
    fspec,
    contrast,
    noise=NoiseCov(),
    l=10,
    r=20,
    rng_seed=0,
    covariates=None,
    penalty=None,
):
    """Monte Carlo variance of a contrast under a saturation design.

    Draws r assignments at the given saturations, averages features over l
    conditional graph draws shared across assignments, and returns the
    mean of phi' Hn^{-1} [(1/n^2) H' Sigma H] Hn^{-1} phi. Assignment
    draws with a singular averaged design contribute the penalty value
    (by default 10 times the largest finite draw) instead of raising.
    """
    model = _as_model(theta)
    labels = np.asarray(clusters.labels, dtype=np.int64)
    n = labels.shape[0]
    contrast = np.asarray(contrast, dtype=np.float64)
    design = SaturationDesign(tuple(int(c) for c in labels), tuple(float(t) for t in tau))
    graphs = draw_graphs(model, gstar, l, substream(rng_seed, 61))
    vals = []
    for rep in range(r):
        a = design.sample(n, substream(rng_seed, 62, rep))
        hbar = features_on(graphs, a, covariates, fspec).mean(axis=0)
        bread = hbar.T @ hbar / n
        if _cond(bread) > DESIGN_COND_CAP:
            vals.append(np.nan)
            continue
        meat = noise.quad(hbar, labels)
        mid = np.linalg.solve(bread, np.linalg.solve(bread, meat).T)
        vals.append(float(contrast @ mid @ contrast))
    return float(_resolve_penalties(vals, penalty).mean())


def eval_saturation_variance_z(
    tau,
    clusters,
    theta,
    gstar,
    working_gamma,
    beta_working,
    fspec,
    contrast,
    link="logistic",
    l=10,
    r=20,
    rng_seed=0,
    covariates=None,
    penalty=None,
):
    """Variance of a contrast for a general estimating equation.

    Same assignment loop, but the bread is the score gradient averaged
    over graph draws and nodes at the supplied working coefficients, and
    the middle is the supplied p x p score covariance.
    """
    model = _as_model(theta)
    labels = np.asarray(clusters.labels, dtype=np.int64)
    n = labels.shape[0]
    contrast = np.asarray(contrast, dtype=np.float64)
    beta_working = np.asarray(beta_working, dtype=np.float64)
    gamma = np.asarray(working_gamma, dtype=np.float64)
    design = SaturationDesign(tuple(int(c) for c in labels), tuple(float(t) for t in tau))
    graphs = draw_graphs(model, gstar, l, substream(rng_seed, 61))
    vals = []
    for rep in range(r):
        a = design.sample(n, substream(rng_seed, 62, rep))
        draws = features_on(graphs, a, covariates, fspec)
        x = draws.reshape(-1, draws.shape[2])
        if link == "logistic":
            mu = expit(x @ beta_working)
            wgt = mu * (1.0 - mu)
            d_mat = (x * wgt[:, None]).T @ x / x.shape[0]
        elif link == "identity":
            d_mat = x.T @ x / x.shape[0]
        else:
            raise ValueError(f"unknown link: {link!r}")
        if _cond(d_mat) > DESIGN_COND_CAP:
            vals.append(np.nan)
            continue
        mid = np.linalg.solve(d_mat, np.linalg.solve(d_mat, gamma).T)
        vals.append(float(contrast @ mid @ contrast))
    return float(_resolve_penalties(vals, penalty).mean())


class GpSurrogate:
    """Gaussian-process interpolant with a unit-length-scale squared
    exponential kernel on saturation vectors.

    The prior mean is the training mean and the amplitude the training
    variance unless given. Factorization adds the smallest jitter from a
    fixed ladder that makes the kernel matrix positive definite.
    """

    def __init__(self, points, values, mean=None, amplitude=None):
        self.points = np.atleast_2d(np.asarray(points, dtype=np.float64))
        values = np.asarray(values, dtype=np.float64)
        if values.shape[0] != self.points.shape[0]:
            raise ValueError("one value per training point required")
        if values.shape[0] < 2:
            raise ValueError("need at least two training points")
        self.mean0 = float(values.mean()) if mean is None else float(mean)
        amp = float(values.var()) if amplitude is None else float(amplitude)
        self.amplitude = max(amp, 1e-12)
        k = self.amplitude * np.exp(-cdist(self.points, self.points, "sqeuclidean"))
        for jit in JITTER_LADDER:
            try:
                self._chol = cholesky(k + jit * np.eye(k.shape[0]), lower=True)
                self.jitter = jit
                break
            except np.linalg.LinAlgError:
                continue
        else:
            raise NumericalError("kernel matrix not positive definite at max jitter")
        self._alpha = cho_solve((self._chol, True), values - self.mean0)

    def posterior(self, queries):
        """Posterior mean and standard deviation at query points."""
        queries = np.atleast_2d(np.asarray(queries, dtype=np.float64))
        ks = self.amplitude * np.exp(-cdist(queries, self.points, "sqeuclidean"))
        mu = self.mean0 + ks @ self._alpha
        v = cho_solve((self._chol, True), ks.T)
        var = self.amplitude - np.einsum("ij,ji->i", ks, v)
        return mu, np.sqrt(np.clip(var, 0.0, None))

    def ucb(self, queries, kappa):
        mu, sd = self.posterior(queries)
        return mu + kappa * sd


def bayes_opt_saturation(objective, domain, n0, N0, kappa=2.0, rng_seed=0, n_candidates=512):
    """Minimize a design objective over saturation vectors.

    Runs n0 uniform pilot evaluations, then N0 rounds that fit a GP to
    exp(-value) (bounded, so the stationary prior is reasonable) and
    evaluate the candidate maximizing the optimistic bound mu + kappa sd
    over a fresh quasi-random candidate set. Returns the best evaluated
    point and the full trace.
    """
    if n0 < 2:
        raise ValueError("need at least two pilot evaluations")
    if N0 < 0:
        raise ValueError("negative acquisition count")
    rng = generator(rng_seed, 64)
    taus = []
    vals = []
    trace = []

    def evaluate(tau):
        value = float(objective(np.asarray(tau, dtype=np.float64)))
        taus.append(np.asarray(tau, dtype=np.float64))
        vals.append(value)
        trace.append({"tau": [float(t) for t in tau], "value": value})

    for _ in range(n0):
        evaluate(domain.sample_uniform(rng))
    for it in range(N0):
        gp = GpSurrogate(np.asarray(taus), np.exp(-np.asarray(vals)))
        cands = domain.candidates(n_candidates, substream(rng_seed, 65, it))
        evaluate(cands[int(np.argmax(gp.ucb(cands, kappa)))])
    best = int(np.argmin(vals))
    return taus[best], trace


def design_with_model_uncertainty(
    tau_candidates,
    clusters,
    bootstrap_thetas,
    fspec,
    contrast,
    noise=NoiseCov(),
    l=10,
    r=20,
    rng_seed=0,
    covariates=None,
    penalty=None,
):
    """Pick the candidate saturation with the best pessimistic variance.

    Evaluates each candidate under every bootstrap re-estimate of the
    network model (shared seeds, so candidates face the same draws) and
    scores it by mean plus two standard deviations across replicates.
    Returns the argmin candidate, first index on ties.
    """
    if len(bootstrap_thetas) < 2:
        raise ValueError("need at least two model replicates")
    if len(tau_candidates) == 0:
        raise ValueError("no candidate saturations")
    scores = []
    for tau in tau_candidates:
        per_rep = [
            eval_saturation_variance(
                tau,
                clusters,
                theta_b,
                None,
                fspec,
                contrast,
                noise=noise,
                l=l,
                r=r,
                rng_seed=substream(rng_seed, 66, b),
                covariates=covariates,
                penalty=penalty,
            )
            for b, theta_b in enumerate(bootstrap_thetas)
        ]
        per_rep = np.asarray(per_rep)
        scores.append(float(per_rep.mean() + 2.0 * per_rep.std(ddof=1)))
    return np.asarray(tau_candidates[int(np.argmin(scores))], dtype=np.float64)


def enumerate_allocations(budget, parts):
    """All length-``parts`` nonnegative integer vectors summing to
    ``budget``, in lexicographic order."""
    if parts == 1:
        return [(budget,)]
    out = []
    for first in range(budget + 1):
        out.extend((first,) + rest for rest in enumerate_allocations(budget - first, parts - 1))
    return out


@dataclass
class SeedingResult:
    """Best seed allocation across clusters with its simulated mean
    outcome, plus the full evaluation trace."""

    allocation: tuple
    mean_outcome: float
    se: float
    trace: list = field(default_factory=list)
    skipped: list = field(default_factory=list)


def optimal_seeding(outcome_model, theta, gstar, seed_budget, domain, l, rng_seed, covariates=None):
    """Exhaustive search over integer seed allocations to clusters.

    Every feasible allocation is simulated on the same l conditional graph
    draws with common within-cluster seed choices, so comparisons are
    paired. Allocations that exceed a cluster size are skipped with a
    warning. Ties go to the lexicographically smallest allocation.
    """
    if seed_budget < 0:
        raise ValueError("negative seed budget")
    if l < 1:
        raise ValueError("need at least one graph draw")
    model = _as_model(theta)
    members = domain.members()
    sizes = domain.sizes
    n = len(domain.labels)
    graphs = draw_graphs(model, gstar, l, substream(rng_seed, 67))
    keys = [stable_key(m) for m in members]
    result = SeedingResult(None, -np.inf, 0.0)
    for alloc in enumerate_allocations(seed_budget, domain.n_clusters):
        if any(c > s for c, s in zip(alloc, sizes)):
            warnings.warn(f"allocation {alloc} exceeds a cluster size, skipped")
            result.skipped.append(alloc)
            continue
        per_draw = np.empty(l)
        for d, g in enumerate(graphs):
            a = np.zeros(n, dtype=np.int64)
            for m, c, key in zip(members, alloc, keys):
                if c:
                    a[generator(rng_seed, 68, d, key).choice(m, size=c, replace=False)] = 1
            y = simulate_outcomes(outcome_model, g, a, covariates, substream(rng_seed, 69, d))
            per_draw[d] = float(np.mean(y))
        mean = float(per_draw.mean())
        se = float(per_draw.std(ddof=1) / np.sqrt(l)) if l > 1 else 0.0
        result.trace.append({"allocation": list(alloc), "mean": mean, "se": se})
        if mean > result.mean_outcome:
            result.allocation, result.mean_outcome, result.se = alloc, mean, se
    if result.allocation is None:
        raise ValueError("no feasible allocation")
    return result


def block_spillover_weights(theta):
    """Per-block spillover weight: average over nodes of the connection
    probability into the block, scaled by expected degree (floored at 1)."""
    params = _as_model(theta)
    if not hasattr(params, "memberships"):
        raise TypeError("block allocation needs a blockmodel")
    mem = params.memberships
    sizes = params.block_sizes()
    n = mem.shape[0]
    # expected degree of node i, excluding the self dyad
    exp_deg = (params.probs[mem] * sizes[None, :]).sum(axis=1) - params.probs[mem, mem]
    scale = np.maximum(exp_deg, 1.0)
    return (params.probs[mem] / scale[:, None]).sum(axis=0) / n


def allocation_value(beta, theta, a):
    """Expected mean outcome of an assignment under the linear-in-block-
    counts response with coefficients (level, direct, spillover)."""
    b0, b1, b2 = (float(x) for x in beta)
    params = _as_model(theta)
    a = np.asarray(a)
    counts = np.bincount(params.memberships[a == 1], minlength=params.n_blocks)
    zeta = block_spillover_weights(params)
    n = params.n_nodes
    return b0 + b1 * counts.sum() / n + b2 * float(zeta @ counts) / n


def budgeted_allocation(beta, theta, budget):
    """Spend a treatment budget across blocks to maximize the expected
    mean outcome, exactly.

    The response is linear in per-block treated counts, so filling blocks
    in order of spillover weight is optimal. The whole budget is spent;
    within a block the lowest-index members are treated. Ties across
    blocks go to the lower block id.
    """
    _, _, b2 = (float(x) for x in beta)
    params = _as_model(theta)
    if not hasattr(params, "memberships"):
        raise TypeError("block allocation needs a blockmodel")
    n = params.n_nodes
    if not 0 <= budget <= n:
        raise ValueError("budget must lie in [0, n]")
    zeta = block_spillover_weights(params)
    sizes = params.block_sizes()
    order = np.lexsort((np.arange(zeta.shape[0]), -b2 * zeta))
    a = np.zeros(n, dtype=np.int64)
    left = int(budget)
    for k in order:
        if left == 0:
            break
        take = min(left, int(sizes[k]))
        block_nodes = np.flatnonzero(params.memberships == k)[:take]
        a[block_nodes] = 1
        left -= take
    return a

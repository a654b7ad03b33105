"""Estimation of outcome models and global effects from partial networks.

The central device is iterated expectation: regression features that depend
on the unobserved graph are replaced by their Monte Carlo average over
graphs drawn from the fitted network model, conditional on whatever dyads
were actually observed. Fitting then proceeds as if the averaged features
were data, with sandwich covariances for the extra layers of noise.
"""

from dataclasses import dataclass, field

import numpy as np
from scipy.special import expit, log_expit

from ._rng import substream
from .errors import NumericalError
from .graphs import Graph, sample_model
from .kernels import dyad_uniforms
from .outcomes import build_features
from .partial import ArdMatrix, SubgraphSample
from .treatments import check_positivity

# conditioning cap on the averaged-feature normal matrix
DESIGN_COND_CAP = 1e8

_CHUNK = 1 << 20


def _cond(matrix):
    sv = np.linalg.svd(matrix, compute_uv=False)
    return np.inf if sv[-1] == 0 else float(sv[0] / sv[-1])


def _sample_general(seed, n, prob_fn):
    """Sample i<j dyads with probabilities given by a vectorized callable."""
    srcs, dsts = [], []
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
        u = dyad_uniforms(seed, ii, jj)
        keep = u < prob_fn(ii, jj)
        srcs.append(ii[keep])
        dsts.append(jj[keep])
        i0 = i1
    if not srcs:
        e = np.empty(0, dtype=np.int64)
        return e, e.copy()
    return np.concatenate(srcs), np.concatenate(dsts)


def _draw_conditional(theta, partial, seed):
    """One graph from the network model holding observed dyads fixed.

    A fully observed graph is returned as is, making the feature average
    exact. Induced and link-traced samples pin every observed dyad at its observed
    value. A masked sample pins retained edges and draws the remaining
    dyads from the exact conditional law P(edge | not retained), which for
    dyad-independent models is p(1 - prop) / (1 - p * prop).
    """
    if isinstance(partial, Graph):
        return partial
    n = theta.n_nodes
    if partial is None or isinstance(partial, ArdMatrix):
        src, dst = _sample_general(seed, n, theta.dyad_prob)
        return Graph.from_edges(n, src, dst)
    if not isinstance(partial, SubgraphSample):
        raise TypeError(f"unsupported partial data: {type(partial).__name__}")
    if partial.kind == "mask":
        if partial.propensity_fn is None:
            raise ValueError("masked sample lacks its propensity function")
        fn = partial.propensity_fn

        def posterior(ii, jj):
            p = theta.dyad_prob(ii, jj)
            prop = np.array([fn(int(i), int(j)) for i, j in zip(ii, jj)])
            return p * (1.0 - prop) / (1.0 - p * prop)

        src, dst = _sample_general(seed, n, posterior)
        obs = set(map(tuple, partial.edges.tolist()))
        keep = np.array(
            [(int(i), int(j)) not in obs for i, j in zip(src, dst)], dtype=bool
        )
        src = np.concatenate([src[keep], partial.edges[:, 0]])
        dst = np.concatenate([dst[keep], partial.edges[:, 1]])
        return Graph.from_edges(n, src, dst)
    inside = partial.node_mask()
    src, dst = _sample_general(seed, n, theta.dyad_prob)
    if partial.kind == "induced":
        keep = ~(inside[src] & inside[dst])
        obs_src = partial.edges[:, 0]
        obs_dst = partial.edges[:, 1]
    else:  # rds: full rows of recruited nodes are observed
        keep = ~(inside[src] | inside[dst])
        obs_src = np.concatenate([partial.edges[:, 0], partial.boundary[:, 0]])
        obs_dst = np.concatenate([partial.edges[:, 1], partial.boundary[:, 1]])
    src = np.concatenate([src[keep], obs_src])
    dst = np.concatenate([dst[keep], obs_dst])
    return Graph.from_edges(n, src, dst)


def iter_graph_draws(theta, partial, l, rng_seed):
    for d in range(l):
        yield _draw_conditional(theta, partial, substream(rng_seed, 51, d))


def draw_graphs(theta, partial, l, rng_seed):
    """List of l conditional graph draws; index d is a pure function of
    (theta, partial, rng_seed, d)."""
    return list(iter_graph_draws(theta, partial, l, rng_seed))


def features_on(graphs, a, covariates, fspec):
    """Stacked feature evaluations, one slab per graph draw."""
    return np.stack([build_features(g, a, covariates, fspec) for g in graphs])


@dataclass
class FeatureAverage:
    """Draw-averaged features and their Monte Carlo standard errors."""

    matrix: np.ndarray
    se: np.ndarray
    n_draws: int


def average_features(theta, partial, a, covariates, fspec, l, rng_seed):
    """Average the regression features over conditional graph draws.

    Entry (i, j) of ``matrix`` estimates E[h_j(S_i, V_i) | observed data];
    ``se`` holds the simulation standard error of that average (zero for
    columns that do not vary across draws, and when l = 1).
    """
    if l < 1:
        raise ValueError("need at least one draw")
    total = None
    totalsq = None
    for g in iter_graph_draws(theta, partial, l, rng_seed):
        h = build_features(g, a, covariates, fspec)
        if total is None:
            total = h.copy()
            totalsq = h * h
        else:
            total += h
            totalsq += h * h
    mean = total / l
    if l > 1:
        var = np.maximum(totalsq - l * mean * mean, 0.0) / (l - 1)
        se = np.sqrt(var / l)
    else:
        se = np.zeros_like(mean)
    return FeatureAverage(mean, se, l)


@dataclass(frozen=True)
class WorkingCov:
    """Working covariance for sandwich middles: independent
    heteroskedastic, or correlated within declared clusters."""

    kind: str = "independent"
    clusters: tuple = None

    def __post_init__(self):
        if self.kind not in ("independent", "cluster"):
            raise ValueError(f"unknown working covariance: {self.kind!r}")
        if self.kind == "cluster" and self.clusters is None:
            raise ValueError("cluster working covariance needs cluster labels")


def _score_meat(scores, working_cov, n):
    """(1/n^2) sum of score outer products, pooled within clusters if asked."""
    if working_cov.kind == "cluster":
        labels = np.asarray(working_cov.clusters, dtype=np.int64)
        if labels.shape[0] != scores.shape[0]:
            raise ValueError("cluster labels must cover all nodes")
        sums = np.zeros((labels.max() + 1, scores.shape[1]))
        np.add.at(sums, labels, scores)
        meat = sums.T @ sums
    else:
        meat = scores.T @ scores
    return meat / (n * n)


@dataclass
class FitResult:
    """Fitted coefficients with a sandwich covariance."""

    beta: np.ndarray
    cov: np.ndarray
    working_cov: str
    link: str
    diagnostics: dict = field(default_factory=dict)


def fit_linear(y, feats, working_cov=WorkingCov()):
    """Least squares on draw-averaged features with a sandwich covariance.

    The bread is the averaged-feature normal matrix; the meat sums residual
    score outer products, either per node or pooled within clusters.
    """
    y = np.asarray(y, dtype=np.float64)
    h = feats.matrix
    n, p = h.shape
    if y.shape != (n,):
        raise ValueError("outcome length must match feature rows")
    bread = h.T @ h / n
    cond = _cond(bread)
    if cond > DESIGN_COND_CAP:
        raise NumericalError("singular averaged design")
    beta = np.linalg.solve(bread, h.T @ y / n)
    resid = y - h @ beta
    meat = _score_meat(h * resid[:, None], working_cov, n)
    binv_meat = np.linalg.solve(bread, meat)
    cov = np.linalg.solve(bread, binv_meat.T)
    cov = 0.5 * (cov + cov.T)
    return FitResult(
        beta,
        cov,
        working_cov.kind,
        "identity",
        {"cond": cond, "n": n, "n_draws": feats.n_draws},
    )


def _mixture_loglik_weights(draws, beta, y):
    """Per-node mixture log likelihood over graph draws and the posterior
    draw weights, computed on the log scale."""
    eta = draws @ beta  # (l, n)
    ll = y[None, :] * log_expit(eta) + (1.0 - y[None, :]) * log_expit(-eta)
    m = ll.max(axis=0)
    log_denom = m + np.log(np.exp(ll - m[None, :]).mean(axis=0))
    w = np.exp(ll - log_denom[None, :])  # mean over draws is 1
    return float(log_denom.sum()), w


def _weighted_logistic_newton(draws, y, w, beta, tol=1e-11, max_iters=60):
    """Maximize the draw-weighted logistic log likelihood by damped Newton."""
    l, n, p = draws.shape
    x = draws.reshape(l * n, p)
    yy = np.tile(y, l)
    r = (w / l).reshape(l * n)

    def q_value(b):
        eta = x @ b
        return float(r @ (yy * log_expit(eta) + (1.0 - yy) * log_expit(-eta)))

    q = q_value(beta)
    for _ in range(max_iters):
        mu = expit(x @ beta)
        grad = x.T @ (r * (yy - mu))
        if np.abs(grad).max() <= tol:
            break
        wgt = r * mu * (1.0 - mu)
        hess = (x * wgt[:, None]).T @ x
        try:
            step = np.linalg.solve(hess, grad)
        except np.linalg.LinAlgError as exc:
            raise NumericalError("singular weighted logistic Hessian") from exc
        scale = 1.0
        for _ in range(30):
            cand = beta + scale * step
            qc = q_value(cand)
            if qc >= q - 1e-12:
                beta, q = cand, qc
                break
            scale *= 0.5
        else:
            break
    return beta


def fit_logistic_em(
    y,
    theta,
    partial,
    a,
    covariates,
    fspec,
    l,
    rng_seed,
    tol=1e-8,
    max_iters=200,
    working_cov=WorkingCov(),
):
    """Monte Carlo EM for logistic outcomes under an unobserved graph.

    Holds one fixed sample of l conditional graph draws. Each iteration
    reweights draws by the posterior probability of the observed outcome
    (the E step) and solves the weighted logistic score to optimality (the
    M step), which makes the mixture log likelihood non-decreasing; any
    decrease beyond rounding raises. Stops when the coefficient update
    falls below ``tol`` in sup norm. A fit with sup norm above 30 is
    flagged as separated.
    """
    y = np.asarray(y, dtype=np.float64)
    if not np.isin(y, (0.0, 1.0)).all():
        raise ValueError("outcomes must be binary")
    graphs = draw_graphs(theta, partial, l, rng_seed)
    draws = features_on(graphs, a, covariates, fspec)
    _, n, p = draws.shape
    if y.shape != (n,):
        raise ValueError("outcome length must match node count")
    beta = np.zeros(p)
    trajectory = []
    converged = False
    iters = 0
    for iters in range(1, max_iters + 1):
        loglik, w = _mixture_loglik_weights(draws, beta, y)
        if trajectory and loglik < trajectory[-1] - 1e-8 * (1.0 + abs(trajectory[-1])):
            raise NumericalError("EM log likelihood decreased")
        trajectory.append(loglik)
        new_beta = _weighted_logistic_newton(draws, y, w, beta.copy())
        delta = np.abs(new_beta - beta).max()
        beta = new_beta
        if delta <= tol:
            converged = True
            break
    final_loglik, w = _mixture_loglik_weights(draws, beta, y)
    trajectory.append(final_loglik)

    # observed-information sandwich for the mixture score
    r = w / l  # (l, n), sums to 1 over draws
    mu = expit(draws @ beta)
    resid = y[None, :] - mu
    scores = np.einsum("ln,lnp->np", r * resid, draws)
    fisher = np.einsum("ln,lnp,lnq->pq", r * mu * (1.0 - mu), draws, draws)
    within = np.einsum("ln,lnp,lnq->pq", r * resid * resid, draws, draws)
    outer = scores.T @ scores
    d_mat = (-fisher + within - outer) / n
    cond = _cond(d_mat)
    if cond > DESIGN_COND_CAP:
        raise NumericalError("singular EM information")
    meat = _score_meat(scores, working_cov, n)
    dinv_meat = np.linalg.solve(d_mat, meat)
    cov = np.linalg.solve(d_mat, dinv_meat.T)
    cov = 0.5 * (cov + cov.T)
    return FitResult(
        beta,
        cov,
        working_cov.kind,
        "logistic",
        {
            "cond": cond,
            "n": n,
            "n_draws": l,
            "em_iterations": iters,
            "converged": converged,
            "loglik": final_loglik,
            "loglik_trajectory": trajectory,
            "separation": bool(np.abs(beta).max() > 30),
        },
    )


@dataclass
class GateEstimate:
    """Global average treatment effect estimate. ``se`` is NaN when the
    estimator does not come with one."""

    estimate: float
    se: float
    method: str


def _fd_step(beta):
    return 1e-5 * (1.0 + np.abs(beta))


def _mean_response_grad(draws, beta, link):
    """Mean model response over draws and nodes, with its beta gradient.

    Analytic for identity and logistic links; any other callable link gets
    central differences with per-coordinate steps 1e-5 (1 + |beta_j|).
    """
    if link == "identity":
        q = draws.mean(axis=(0, 1))
        return float(q @ beta), q
    if link == "logistic":
        mu = expit(draws @ beta)
        grad = np.einsum("ln,lnp->p", mu * (1.0 - mu), draws) / (
            draws.shape[0] * draws.shape[1]
        )
        return float(mu.mean()), grad
    if callable(link):
        value = float(link(draws @ beta).mean())
        grad = np.empty(beta.shape[0])
        steps = _fd_step(beta)
        for j in range(beta.shape[0]):
            up = beta.copy()
            dn = beta.copy()
            up[j] += steps[j]
            dn[j] -= steps[j]
            grad[j] = (
                float(link(draws @ up).mean()) - float(link(draws @ dn).mean())
            ) / (2 * steps[j])
        return value, grad
    raise ValueError(f"unknown link: {link!r}")


def plugin_mean_outcome(fit, theta, partial, a, covariates, fspec, l, rng_seed, link=None):
    """Model-implied mean outcome at a fixed assignment, with a
    delta-method standard error."""
    link = link or fit.link
    beta = np.asarray(fit.beta, dtype=np.float64)
    graphs = draw_graphs(theta, partial, l, rng_seed)
    draws = features_on(graphs, np.asarray(a), covariates, fspec)
    estimate, grad = _mean_response_grad(draws, beta, link)
    var = float(grad @ fit.cov @ grad)
    return GateEstimate(estimate, float(np.sqrt(max(var, 0.0))), "regression-plug-in")


def plugin_gate(fit, theta, partial, covariates, fspec, l, rng_seed, link=None):
    """Plug-in global effect with a delta-method standard error.

    Contrasts the model-implied mean outcome at all-treated versus
    none-treated, averaging features over the same conditional graph draws
    for both arms. The gradient is analytic for identity and logistic
    links; any other callable link falls back to central differences with
    per-coordinate steps 1e-5 (1 + |beta_j|).
    """
    link = link or fit.link
    beta = np.asarray(fit.beta, dtype=np.float64)
    graphs = draw_graphs(theta, partial, l, rng_seed)
    n = graphs[0].n
    draws1 = features_on(graphs, np.ones(n), covariates, fspec)
    draws0 = features_on(graphs, np.zeros(n), covariates, fspec)
    v1, g1 = _mean_response_grad(draws1, beta, link)
    v0, g0 = _mean_response_grad(draws0, beta, link)
    estimate = v1 - v0
    grad = g1 - g0
    var = float(grad @ fit.cov @ grad)
    se = float(np.sqrt(max(var, 0.0)))
    return GateEstimate(estimate, se, "regression-plug-in")


def ht_estimator(y, a, g, design):
    """Reweighting estimator over full-neighborhood exposure events.

    A node contributes through the all-treated event (itself and every
    neighbor treated) or the all-control event, inverse-weighted by the
    design's probability of that event. Requires both probabilities to be
    positive for every node. No standard error is reported.
    """
    y = np.asarray(y, dtype=np.float64)
    a = np.asarray(a)
    p1, p0 = design.exposure_probs(g)
    check_positivity(p1, p0)
    a_bool = a.astype(bool)
    treated_nbrs = np.array([a_bool[g.neighbors(i)].all() for i in range(g.n)])
    control_nbrs = np.array([(~a_bool[g.neighbors(i)]).all() for i in range(g.n)])
    e1 = (a == 1) & treated_nbrs
    e0 = (a == 0) & control_nbrs
    estimate = float(np.mean(y * e1 / p1 - y * e0 / p0))
    return GateEstimate(estimate, float("nan"), "horvitz-thompson")


def dm_estimator(y, a):
    """Difference in means with the usual two-sample standard error."""
    y = np.asarray(y, dtype=np.float64)
    a = np.asarray(a)
    y1 = y[a == 1]
    y0 = y[a == 0]
    if y1.size == 0 or y0.size == 0:
        raise ValueError("both treatment arms must be nonempty")
    estimate = float(y1.mean() - y0.mean())
    v1 = y1.var(ddof=1) / y1.size if y1.size > 1 else 0.0
    v0 = y0.var(ddof=1) / y0.size if y0.size > 1 else 0.0
    return GateEstimate(estimate, float(np.sqrt(v1 + v0)), "difference-in-means")

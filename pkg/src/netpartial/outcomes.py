"""Exposure maps, graph confounders, and outcome models.

Exposure maps reduce a treatment vector and a graph to the scalar each
node's outcome is allowed to depend on; confounders summarize node position.
Outcome models pair a conditional outcome law with simulation and, where
available, a closed-form global effect of treating everyone versus no one.
"""

from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np
from scipy.special import expit

from . import kernels
from ._rng import generator, substream


# ---------------------------------------------------------------------------
# exposure maps


@dataclass(frozen=True)
class TreatedCount:
    """Number of treated neighbors."""


@dataclass(frozen=True)
class TreatedFraction:
    """Share of neighbors treated; 0 for isolated nodes (flagged)."""


@dataclass(frozen=True)
class NeighborTreated:
    """Indicator of at least one treated neighbor."""


@dataclass(frozen=True)
class RiskShare:
    """Community endowment share: mean treatment in the node's community."""

    communities: tuple

    def labels(self):
        return np.asarray(self.communities, dtype=np.int64)


@dataclass(frozen=True)
class HearingExposure:
    """Walk-weighted reach: sum_t coeffs[t-1] (G^t a)_i for t = 1..T."""

    coeffs: tuple

    @classmethod
    def from_decay(cls, depth, q):
        return cls(tuple(float(q) ** t for t in range(1, depth + 1)))


class ExposureResult(NamedTuple):
    values: np.ndarray
    flags: np.ndarray


def compute_exposure(g, a, spec):
    """Evaluate an exposure map; flags mark nodes where the map degenerated
    (currently only isolated nodes under TreatedFraction)."""
    a = np.asarray(a, dtype=np.float64)
    if a.shape != (g.n,):
        raise ValueError("treatment vector length must match node count")
    flags = np.zeros(g.n, dtype=bool)
    if isinstance(spec, TreatedCount):
        vals = kernels.adjacency_matvec(g.indptr, g.indices, a)
    elif isinstance(spec, TreatedFraction):
        counts = kernels.adjacency_matvec(g.indptr, g.indices, a)
        deg = g.degrees
        flags = deg == 0
        vals = np.divide(counts, deg, out=np.zeros(g.n), where=deg > 0)
    elif isinstance(spec, NeighborTreated):
        counts = kernels.adjacency_matvec(g.indptr, g.indices, a)
        vals = (counts >= 1).astype(np.float64)
    elif isinstance(spec, RiskShare):
        labels = spec.labels()
        if labels.shape != (g.n,):
            raise ValueError("community labels must cover all nodes")
        sizes = np.bincount(labels).astype(np.float64)
        sums = np.bincount(labels, weights=a)
        vals = (sums / sizes)[labels]
    elif isinstance(spec, HearingExposure):
        coeffs = np.asarray(spec.coeffs, dtype=np.float64)
        vals = kernels.hearing_exposure(g.indptr, g.indices, a, coeffs)
    else:
        raise TypeError(f"unknown exposure spec: {type(spec).__name__}")
    return ExposureResult(vals, flags)


# ---------------------------------------------------------------------------
# confounders and regression features


@dataclass(frozen=True)
class ConfounderSpec:
    """Graph confounders: degree over mean degree, plus covariate columns."""

    degree_ratio: bool = False
    covariate_cols: tuple = ()


def compute_confounders(g, covariates, spec):
    cols = []
    if spec.degree_ratio:
        deg = g.degrees.astype(np.float64)
        dbar = deg.mean()
        cols.append(deg / dbar if dbar > 0 else deg)
    for c in spec.covariate_cols:
        if covariates is None:
            raise ValueError("covariates required by the confounder spec")
        cols.append(np.asarray(covariates, dtype=np.float64).reshape(g.n, -1)[:, c])
    if not cols:
        return np.empty((g.n, 0))
    return np.column_stack(cols)


@dataclass(frozen=True)
class FeatureSpec:
    """Column layout of the regression features h(S, V).

    Order: intercept, own treatment, exposure (optionally divided by the
    draw's mean degree), confounders.
    """

    intercept: bool = True
    own_treatment: bool = False
    exposure: object = None
    scale_by_mean_degree: bool = False
    confounders: ConfounderSpec = field(default_factory=ConfounderSpec)

    @property
    def width(self):
        return (
            int(self.intercept)
            + int(self.own_treatment)
            + int(self.exposure is not None)
            + int(self.confounders.degree_ratio)
            + len(self.confounders.covariate_cols)
        )


def build_features(g, a, covariates, spec):
    """Evaluate the feature columns on one graph draw."""
    a = np.asarray(a, dtype=np.float64)
    cols = []
    if spec.intercept:
        cols.append(np.ones(g.n))
    if spec.own_treatment:
        cols.append(a)
    if spec.exposure is not None:
        vals = compute_exposure(g, a, spec.exposure).values
        if spec.scale_by_mean_degree:
            dbar = g.degrees.mean()
            vals = vals / dbar if dbar > 0 else vals
        cols.append(vals)
    cols.append(compute_confounders(g, covariates, spec.confounders))
    return np.column_stack(cols)


# ---------------------------------------------------------------------------
# outcome models


@dataclass(frozen=True)
class UganderLinear:
    """Degree-scaled linear outcomes with multiplicative interference.

    Baseline (d_i / dbar)(alpha + b x_i + sigma eps_i), amplified by
    1 + delta a_i + gamma (treated neighbor fraction).
    """

    alpha: float = 1.0
    b: float = 1.0
    delta: float = 1.0
    gamma: float = -0.5
    sigma: float = 0.5

    def __post_init__(self):
        if self.sigma < 0:
            raise ValueError("sigma must be nonnegative")


@dataclass(frozen=True)
class HearingLogistic:
    """Bernoulli outcomes with log-odds linear in walk-weighted reach."""

    alpha0: float
    alpha1: float
    coeffs: tuple


@dataclass(frozen=True)
class ComplexContagion:
    """Threshold adoption seeded by the treatment vector.

    Thresholds are normal (mean ``level``, sd ``threshold_sd``) truncated to
    the nonnegative half-line by rejection; sd 0 pins them at ``level``. A
    node adopts once its count of previously adopted neighbors reaches its
    threshold; adopters stay adopters. Outcome is adoption within ``steps``.
    """

    level: float = 2.0
    threshold_sd: float = 0.1
    steps: int = 3

    def __post_init__(self):
        if self.threshold_sd < 0:
            raise ValueError("threshold sd must be nonnegative")
        if self.steps < 0:
            raise ValueError("steps must be nonnegative")


@dataclass(frozen=True)
class LocalDiffusion:
    """One-step diffusion: infection probability q given any treated
    neighbor, 0 otherwise."""

    q: float = 0.2

    def __post_init__(self):
        if not 0 <= self.q <= 1:
            raise ValueError("q must lie in [0, 1]")


@dataclass(frozen=True)
class GenericLinear:
    """Linear outcomes over an explicit feature layout plus normal noise."""

    beta: tuple
    features: FeatureSpec
    sigma: float = 1.0

    def __post_init__(self):
        if self.sigma < 0:
            raise ValueError("sigma must be nonnegative")
        if len(self.beta) != self.features.width:
            raise ValueError("beta length must match the feature width")


def _covariate_column(covariates, n):
    if covariates is None:
        raise ValueError("this outcome model requires covariates")
    x = np.asarray(covariates, dtype=np.float64).reshape(n, -1)
    return x[:, 0]


def _truncated_thresholds(level, sd, n, rng):
    if sd == 0:
        return np.full(n, float(level))
    out = np.empty(n)
    remaining = np.arange(n)
    # rejection against the nonnegative half-line
    while remaining.size:
        draw = rng.normal(level, sd, size=remaining.size)
        ok = draw >= 0
        out[remaining[ok]] = draw[ok]
        remaining = remaining[~ok]
    return out


def simulate_outcomes(model, g, a, covariates=None, rng_seed=0):
    """One outcome draw for every node under treatment vector ``a``."""
    a = np.asarray(a, dtype=np.float64)
    if a.shape != (g.n,):
        raise ValueError("treatment vector length must match node count")
    rng = generator(rng_seed, 31)
    if isinstance(model, UganderLinear):
        x = _covariate_column(covariates, g.n)
        deg = g.degrees.astype(np.float64)
        dbar = deg.mean()
        eps = rng.standard_normal(g.n)
        base = (deg / dbar) * (model.alpha + model.b * x + model.sigma * eps)
        frac = compute_exposure(g, a, TreatedFraction()).values
        return base * (1.0 + model.delta * a + model.gamma * frac)
    if isinstance(model, HearingLogistic):
        reach = compute_exposure(g, a, HearingExposure(tuple(model.coeffs))).values
        p = expit(model.alpha0 + model.alpha1 * reach)
        return (rng.random(g.n) < p).astype(np.float64)
    if isinstance(model, ComplexContagion):
        thresholds = _truncated_thresholds(model.level, model.threshold_sd, g.n, rng)
        seeds = (a > 0).astype(np.uint8)
        adopted = kernels.threshold_cascade(
            g.indptr, g.indices, seeds, thresholds, model.steps
        )
        return adopted.astype(np.float64)
    if isinstance(model, LocalDiffusion):
        touched = compute_exposure(g, a, NeighborTreated()).values
        return (rng.random(g.n) < model.q * touched).astype(np.float64)
    if isinstance(model, GenericLinear):
        h = build_features(g, a, covariates, model.features)
        return h @ np.asarray(model.beta) + model.sigma * rng.standard_normal(g.n)
    raise TypeError(f"unknown outcome model: {type(model).__name__}")


def conditional_mean(model, g, a, covariates=None):
    """E[Y | a, G] where the model admits one in closed form."""
    a = np.asarray(a, dtype=np.float64)
    if isinstance(model, UganderLinear):
        x = _covariate_column(covariates, g.n)
        deg = g.degrees.astype(np.float64)
        base = (deg / deg.mean()) * (model.alpha + model.b * x)
        frac = compute_exposure(g, a, TreatedFraction()).values
        return base * (1.0 + model.delta * a + model.gamma * frac)
    if isinstance(model, HearingLogistic):
        reach = compute_exposure(g, a, HearingExposure(tuple(model.coeffs))).values
        return expit(model.alpha0 + model.alpha1 * reach)
    if isinstance(model, LocalDiffusion):
        touched = compute_exposure(g, a, NeighborTreated()).values
        return model.q * touched
    if isinstance(model, GenericLinear):
        return build_features(g, a, covariates, model.features) @ np.asarray(model.beta)
    raise TypeError("no closed-form conditional mean for this model")


def true_gate(model, g, covariates=None, n_draws=200, rng_seed=0):
    """Global effect of all-treated versus none-treated on this graph.

    Closed form when the model's conditional mean is available, Monte Carlo
    over ``n_draws`` outcome draws otherwise.
    """
    ones = np.ones(g.n)
    zeros = np.zeros(g.n)
    if isinstance(model, (UganderLinear, HearingLogistic, LocalDiffusion, GenericLinear)):
        return float(
            conditional_mean(model, g, ones, covariates).mean()
            - conditional_mean(model, g, zeros, covariates).mean()
        )
    total = 0.0
    for d in range(n_draws):
        y1 = simulate_outcomes(model, g, ones, covariates, substream(rng_seed, 32, d, 1))
        y0 = simulate_outcomes(model, g, zeros, covariates, substream(rng_seed, 32, d, 0))
        total += y1.mean() - y0.mean()
    return total / n_draws

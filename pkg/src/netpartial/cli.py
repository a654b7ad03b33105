"""Config-driven command line interface.

Each subcommand reads one JSON config (experiments have too many knobs for
flags), validates it with field-path error messages, and writes
machine-readable outputs. A config plus its seed fully determines every
output byte. Exit codes: 0 ok, 2 invalid config, 3 numerical failure.
"""

import argparse
import json
import os
import sys
from concurrent.futures import ThreadPoolExecutor

import numpy as np

from . import fileio
from ._rng import generator, substream
from .design import (
    DesignClusters,
    NoiseCov,
    bayes_opt_saturation,
    eval_saturation_variance,
    optimal_seeding,
)
from .errors import NumericalError, PositivityError
from .estimation import (
    bootstrap_ard,
    estimate_sbm_from_ard,
    estimate_sbm_from_rds,
    estimate_sbm_from_subgraph,
    fit_beta_model,
)
from .graphs import BetaParams, SbmParams, sample_model
from .inference import (
    WorkingCov,
    average_features,
    dm_estimator,
    fit_linear,
    fit_logistic_em,
    ht_estimator,
    plugin_gate,
)
from .outcomes import (
    ComplexContagion,
    ConfounderSpec,
    FeatureSpec,
    GenericLinear,
    HearingExposure,
    HearingLogistic,
    LocalDiffusion,
    NeighborTreated,
    RiskShare,
    TreatedCount,
    TreatedFraction,
    UganderLinear,
    simulate_outcomes,
    true_gate,
)
from .partial import ard_of, overlapping_traits, split_traits
from .treatments import BernoulliDesign, ClusterDesign, SaturationDesign


class ValidationError(Exception):
    """Config problem, reported with the offending field path."""

    def __init__(self, field, message):
        self.field = field
        super().__init__(message)


_KINDS = {
    "int": ((int,), "an integer"),
    "number": ((int, float), "a number"),
    "str": ((str,), "a string"),
    "bool": ((bool,), "a boolean"),
    "list": ((list,), "a list"),
    "dict": ((dict,), "a mapping"),
}

_MISSING = object()


def _get(cfg, path, kind, default=_MISSING):
    cur = cfg
    for part in path.split("."):
        if not isinstance(cur, dict) or part not in cur:
            if default is not _MISSING:
                return default
            raise ValidationError(path, "missing required field")
        cur = cur[part]
    types, label = _KINDS[kind]
    if isinstance(cur, bool) and kind != "bool":
        raise ValidationError(path, f"expected {label}")
    if not isinstance(cur, types):
        raise ValidationError(path, f"expected {label}")
    return cur


def _get_path(cfg, path, default=_MISSING):
    value = _get(cfg, path, "str", default)
    if value is default and default is not _MISSING:
        return value
    if not os.path.exists(value):
        raise ValidationError(path, f"file not found: {value}")
    return value


def _out_path(cfg, path):
    value = _get(cfg, path, "str")
    parent = os.path.dirname(value)
    if parent:
        os.makedirs(parent, exist_ok=True)
    return value


def _subfield(field, key):
    return f"{field}.{key}" if field else key


# ---------------------------------------------------------------------------
# config fragments -> library objects


def _parse_model(d, field):
    kind = _get(d, "kind", "str")
    try:
        if kind == "sbm":
            probs = np.asarray(_get(d, "probs", "list"), dtype=np.float64)
            if "memberships" in d:
                mem = np.asarray(_get(d, "memberships", "list"), dtype=np.int64)
            else:
                sizes = _get(d, "block_sizes", "list")
                mem = np.repeat(np.arange(len(sizes)), sizes)
            return SbmParams(probs, mem)
        if kind == "beta":
            return BetaParams(np.asarray(_get(d, "nu", "list"), dtype=np.float64))
    except ValidationError:
        raise
    except (ValueError, TypeError) as exc:
        raise ValidationError(field, str(exc)) from exc
    raise ValidationError(_subfield(field, "kind"), f"unknown model kind {kind!r}")


def _parse_exposure(d, field):
    kind = _get(d, "kind", "str")
    if kind == "treated-count":
        return TreatedCount()
    if kind == "treated-fraction":
        return TreatedFraction()
    if kind == "neighbor-treated":
        return NeighborTreated()
    if kind == "risk-share":
        return RiskShare(tuple(_get(d, "communities", "list")))
    if kind == "hearing":
        if "coeffs" in d:
            return HearingExposure(tuple(float(c) for c in _get(d, "coeffs", "list")))
        return HearingExposure.from_decay(
            _get(d, "depth", "int"), float(_get(d, "q", "number"))
        )
    raise ValidationError(_subfield(field, "kind"), f"unknown exposure kind {kind!r}")


def _parse_feature_spec(d, field):
    conf = d.get("confounders", {})
    exposure = d.get("exposure")
    return FeatureSpec(
        intercept=_get(d, "intercept", "bool", True),
        own_treatment=_get(d, "own_treatment", "bool", False),
        exposure=None
        if exposure is None
        else _parse_exposure(exposure, _subfield(field, "exposure")),
        scale_by_mean_degree=_get(d, "scale_by_mean_degree", "bool", False),
        confounders=ConfounderSpec(
            degree_ratio=_get(conf, "degree_ratio", "bool", False),
            covariate_cols=tuple(_get(conf, "covariate_cols", "list", [])),
        ),
    )


def _parse_outcome_model(d, field):
    kind = _get(d, "kind", "str")
    try:
        if kind == "ugander-linear":
            return UganderLinear(
                alpha=float(_get(d, "alpha", "number", 1.0)),
                b=float(_get(d, "b", "number", 1.0)),
                delta=float(_get(d, "delta", "number", 1.0)),
                gamma=float(_get(d, "gamma", "number", -0.5)),
                sigma=float(_get(d, "sigma", "number", 0.5)),
            )
        if kind == "hearing-logistic":
            if "coeffs" in d:
                coeffs = tuple(float(c) for c in _get(d, "coeffs", "list"))
            else:
                coeffs = HearingExposure.from_decay(
                    _get(d, "depth", "int"), float(_get(d, "q", "number"))
                ).coeffs
            return HearingLogistic(
                alpha0=float(_get(d, "alpha0", "number")),
                alpha1=float(_get(d, "alpha1", "number")),
                coeffs=coeffs,
            )
        if kind == "complex-contagion":
            return ComplexContagion(
                level=float(_get(d, "level", "number", 2.0)),
                threshold_sd=float(_get(d, "threshold_sd", "number", 0.1)),
                steps=_get(d, "steps", "int", 3),
            )
        if kind == "local-diffusion":
            return LocalDiffusion(q=float(_get(d, "q", "number", 0.2)))
        if kind == "generic-linear":
            return GenericLinear(
                beta=tuple(float(b) for b in _get(d, "beta", "list")),
                features=_parse_feature_spec(
                    _get(d, "features", "dict"), _subfield(field, "features")
                ),
                sigma=float(_get(d, "sigma", "number", 1.0)),
            )
    except ValidationError:
        raise
    except (ValueError, TypeError) as exc:
        raise ValidationError(field, str(exc)) from exc
    raise ValidationError(_subfield(field, "kind"), f"unknown outcome model {kind!r}")


def _resolve_labels(value, field, memberships):
    """Cluster labels: an inline list, or "blocks" for model memberships."""
    if value == "blocks":
        if memberships is None:
            raise ValidationError(field, "no block memberships available here")
        return tuple(int(c) for c in memberships)
    if isinstance(value, list):
        return tuple(int(c) for c in value)
    raise ValidationError(field, 'expected a list of labels or "blocks"')


def _parse_design(d, field, memberships=None):
    kind = _get(d, "kind", "str")
    try:
        if kind == "bernoulli":
            return BernoulliDesign(float(_get(d, "p", "number")))
        if kind == "cluster":
            labels = _resolve_labels(
                d.get("labels", _MISSING), _subfield(field, "labels"), memberships
            )
            return ClusterDesign(labels, _get(d, "n_treated", "int"))
        if kind == "saturation":
            labels = _resolve_labels(
                d.get("labels", _MISSING), _subfield(field, "labels"), memberships
            )
            tau = tuple(float(t) for t in _get(d, "tau", "list"))
            return SaturationDesign(labels, tau)
    except ValidationError:
        raise
    except (ValueError, TypeError) as exc:
        raise ValidationError(field, str(exc)) from exc
    raise ValidationError(_subfield(field, "kind"), f"unknown design kind {kind!r}")


def _parse_working_cov(d, field, memberships=None):
    if d is None:
        return WorkingCov()
    kind = _get(d, "kind", "str", "independent")
    if kind == "independent":
        return WorkingCov()
    if kind == "cluster":
        labels = _resolve_labels(
            d.get("clusters", _MISSING), _subfield(field, "clusters"), memberships
        )
        return WorkingCov("cluster", labels)
    raise ValidationError(_subfield(field, "kind"), f"unknown working covariance {kind!r}")


def _parse_noise(d):
    if d is None:
        return NoiseCov()
    return NoiseCov(
        kind=_get(d, "kind", "str", "independent"),
        variance=float(_get(d, "variance", "number", 1.0)),
        rho=float(_get(d, "rho", "number", 0.0)),
    )


def _load_estimate_model(cfg, field):
    """Network model for a command: inline parameters or an estimate file."""
    if "model" in cfg:
        return _parse_model(_get(cfg, "model", "dict"), "model")
    path = _get_path(cfg, field)
    est = fileio.read_estimate_json(path)
    if est.kind == "sbm":
        return est.to_sbm_params()
    return BetaParams(np.clip(est.nu, 0.0, None))


def _load_traits(cfg, field):
    return fileio.read_traits_csv(_get_path(cfg, field))


def _load_partial(cfg, field):
    """Partial network data G*; ``full`` means the graph itself."""
    d = _get(cfg, field, "dict", None)
    if d is None:
        return None
    kind = _get(d, "kind", "str")
    if kind == "none":
        return None
    if kind == "full":
        return fileio.read_graph_csv(
            _get_path(d, "graph"), n=_get(d, "n", "int", None)
        )
    if kind == "ard":
        traits = fileio.read_traits_csv(_get_path(d, "traits"))
        return fileio.read_ard_csv(_get_path(d, "ard"), traits)
    if kind in ("induced", "rds", "mask"):
        fn = None
        if kind == "mask":
            p = float(_get(d, "propensity", "number"))
            fn = lambda i, j: p  # noqa: E731
        sample = fileio.read_subsample_json(_get_path(d, "subsample"), propensity_fn=fn)
        if sample.kind != kind:
            raise ValidationError(
                _subfield(field, "kind"), f"subsample file holds kind {sample.kind!r}"
            )
        return sample
    raise ValidationError(_subfield(field, "kind"), f"unknown data kind {kind!r}")


def _memberships_from(cfg, field):
    d = _get(cfg, field, "dict", None)
    if d is not None and "sbm_json" in d:
        return fileio.read_sbm_json(_get_path(d, "sbm_json")).memberships
    value = _get(cfg, field, "list")
    return np.asarray(value, dtype=np.int64)


# ---------------------------------------------------------------------------
# subcommands


def cmd_simulate(cfg, threads):
    seed = _get(cfg, "seed", "int")
    params = _parse_model(_get(cfg, "model", "dict"), "model")
    g = sample_model(params, substream(seed, 1))
    out = _get(cfg, "output", "dict")
    if "graph" in out:
        fileio.write_graph_csv(_out_path(cfg, "output.graph"), g)
    if "sbm" in out:
        if not isinstance(params, SbmParams):
            raise ValidationError("output.sbm", "model is not a blockmodel")
        fileio.write_sbm_json(_out_path(cfg, "output.sbm"), params)
    traits = None
    if "traits" in cfg:
        td = _get(cfg, "traits", "dict")
        if not isinstance(params, SbmParams):
            raise ValidationError("traits", "trait generation needs a blockmodel")
        if "per_block" in td:
            traits = split_traits(params.memberships, _get(td, "per_block", "int"))
        else:
            probs = np.asarray(_get(td, "block_probs", "list"), dtype=np.float64)
            traits = overlapping_traits(params.memberships, probs, substream(seed, 2))
        fileio.write_traits_csv(_out_path(cfg, "output.traits"), traits)
    if "ard" in out:
        if traits is None:
            raise ValidationError("traits", "ARD output needs a traits block")
        fileio.write_ard_csv(_out_path(cfg, "output.ard"), ard_of(g, traits))
    covariates = None
    if "covariates" in cfg:
        cols = _get(cfg, "covariates.cols", "int")
        covariates = generator(seed, 3).standard_normal((g.n, cols))
        fileio.write_covariates_csv(_out_path(cfg, "output.covariates"), covariates)
    a = None
    if "treatment" in cfg:
        design = _parse_design(
            _get(cfg, "treatment", "dict"),
            "treatment",
            memberships=getattr(params, "memberships", None),
        )
        a = design.sample(g.n, substream(seed, 4))
        fileio.write_column_csv(_out_path(cfg, "output.assignment"), "a", a, integer=True)
    if "outcome" in cfg:
        model = _parse_outcome_model(_get(cfg, "outcome", "dict"), "outcome")
        if a is None:
            raise ValidationError("treatment", "outcomes need a treatment block")
        y = simulate_outcomes(model, g, a, covariates, substream(seed, 5))
        fileio.write_column_csv(_out_path(cfg, "output.outcomes"), "y", y)


def cmd_ard(cfg, threads):
    _get(cfg, "seed", "int")
    traits = _load_traits(cfg, "traits")
    g = fileio.read_graph_csv(_get_path(cfg, "graph"), n=traits.shape[0])
    fileio.write_ard_csv(_out_path(cfg, "output.ard"), ard_of(g, traits))


def cmd_estimate_net(cfg, threads):
    _get(cfg, "seed", "int")
    kind = _get(cfg, "data.kind", "str")
    if kind == "ard":
        traits = _load_traits(cfg, "data.traits")
        ard = fileio.read_ard_csv(_get_path(cfg, "data.ard"), traits)
        est = estimate_sbm_from_ard(
            ard, _get(cfg, "k", "int"), constrained=_get(cfg, "constrained", "bool", True)
        )
    elif kind in ("induced", "mask"):
        sample = fileio.read_subsample_json(_get_path(cfg, "data.subsample"))
        mem = _memberships_from(cfg, "memberships")
        est = estimate_sbm_from_subgraph(sample, mem, _get(cfg, "k", "int"))
    elif kind == "rds":
        sample = fileio.read_subsample_json(_get_path(cfg, "data.subsample"))
        mem = _memberships_from(cfg, "memberships")
        est = estimate_sbm_from_rds(sample, mem, _get(cfg, "k", "int"))
    elif kind == "beta":
        g = fileio.read_graph_csv(_get_path(cfg, "data.graph"), n=_get(cfg, "n", "int", None))
        est = fit_beta_model(g.degrees)
    else:
        raise ValidationError("data.kind", f"unknown data kind {kind!r}")
    fileio.write_estimate_json(_out_path(cfg, "output.estimate"), est)


def cmd_fit_outcome(cfg, threads):
    seed = _get(cfg, "seed", "int")
    params = _load_estimate_model(cfg, "estimate")
    partial = _load_partial(cfg, "data")
    y = fileio.read_column_csv(_get_path(cfg, "outcomes"))
    a = fileio.read_column_csv(_get_path(cfg, "assignment"), integer=True)
    covariates = None
    if "covariates" in cfg:
        covariates = fileio.read_covariates_csv(_get_path(cfg, "covariates"))
    fspec = _parse_feature_spec(_get(cfg, "features", "dict"), "features")
    ll = _get(cfg, "draws", "int")
    link = _get(cfg, "link", "str", "identity")
    wcov = _parse_working_cov(
        _get(cfg, "working_cov", "dict", None),
        "working_cov",
        memberships=getattr(params, "memberships", None),
    )
    if link == "identity":
        feats = average_features(params, partial, a, covariates, fspec, ll, substream(seed, 7))
        fit = fit_linear(y, feats, wcov)
    elif link == "logistic":
        fit = fit_logistic_em(
            y,
            params,
            partial,
            a,
            covariates,
            fspec,
            ll,
            substream(seed, 7),
            tol=float(_get(cfg, "tol", "number", 1e-6)),
            max_iters=_get(cfg, "max_iters", "int", 200),
            working_cov=wcov,
        )
    else:
        raise ValidationError("link", f"unknown link {link!r}")
    fileio.write_fit_json(_out_path(cfg, "output.fit"), fit)
    if "gate" in _get(cfg, "output", "dict"):
        gate = plugin_gate(
            fit, params, partial, covariates, fspec, ll, substream(seed, 8), link=link
        )
        fileio.write_gate_json(_out_path(cfg, "output.gate"), gate)


def _gate_methods(cfg):
    methods = _get(cfg, "estimators", "list", ["ard-regression", "full-regression", "ht", "dm"])
    known = {"ard-regression", "full-regression", "ht", "dm"}
    for m in methods:
        if m not in known:
            raise ValidationError("estimators", f"unknown estimator {m!r}")
    return methods


def _gate_replication(rep, seed, spec):
    """One replication of the GATE study; returns records for the table."""
    rs = substream(seed, 100, rep)
    params = spec["params"]
    n = params.n_nodes
    g = sample_model(params, substream(rs, 1))
    covariates = None
    if spec["covariate_cols"]:
        covariates = generator(rs, 2).standard_normal((n, spec["covariate_cols"]))
    design = spec["design"]
    a = design.sample(n, substream(rs, 3))
    y = simulate_outcomes(spec["outcome"], g, a, covariates, substream(rs, 4))
    truth = true_gate(spec["outcome"], g, covariates, spec["truth_draws"], substream(rs, 5))
    fspec = spec["fspec"]
    ll = spec["draws"]
    records = []

    def emit(method, gate):
        est = gate.estimate
        records.append({"replication": rep, "method": method, "metric": "estimate", "value": est})
        records.append(
            {"replication": rep, "method": method, "metric": "error", "value": est - truth}
        )
        if np.isfinite(gate.se):
            records.append({"replication": rep, "method": method, "metric": "se", "value": gate.se})
            half = 1.96 * gate.se
            covered = float(abs(est - truth) <= half)
            records.append(
                {"replication": rep, "method": method, "metric": "covered", "value": covered}
            )

    for method in spec["methods"]:
        if method == "ard-regression":
            traits = split_traits(params.memberships, spec["traits_per_block"])
            ard = ard_of(g, traits)
            est = estimate_sbm_from_ard(ard, params.n_blocks)
            theta = est.to_sbm_params()
            wcov = WorkingCov("cluster", tuple(theta.memberships)) if spec["cluster_se"] else WorkingCov()
            feats = average_features(theta, ard, a, covariates, fspec, ll, substream(rs, 6))
            fit = fit_linear(y, feats, wcov)
            emit(method, plugin_gate(fit, theta, ard, covariates, fspec, ll, substream(rs, 6)))
        elif method == "full-regression":
            wcov = WorkingCov("cluster", tuple(params.memberships)) if spec["cluster_se"] else WorkingCov()
            feats = average_features(params, g, a, covariates, fspec, 1, substream(rs, 7))
            fit = fit_linear(y, feats, wcov)
            emit(method, plugin_gate(fit, params, g, covariates, fspec, 1, substream(rs, 7)))
        elif method == "ht":
            try:
                emit(method, ht_estimator(y, a, g, design))
            except PositivityError:
                records.append(
                    {"replication": rep, "method": method, "metric": "failed", "value": 1.0}
                )
        elif method == "dm":
            emit(method, dm_estimator(y, a))
    records.append({"replication": rep, "method": "truth", "metric": "estimate", "value": truth})
    return records


def run_gate_study(cfg, threads=1):
    """Replicated synthetic comparison of GATE estimators.

    Per replication: draw a graph from the true model, assign treatment,
    simulate outcomes, then estimate the effect by regression on averaged
    features (from ARD and from the full graph), reweighting, and arm
    means. Emits per-replication estimates and errors plus aggregate bias,
    rmse, and coverage rows (replication -1).
    """
    seed = _get(cfg, "seed", "int")
    params = _parse_model(_get(cfg, "model", "dict"), "model")
    spec = {
        "params": params,
        "design": _parse_design(
            _get(cfg, "treatment", "dict"), "treatment", memberships=params.memberships
        ),
        "outcome": _parse_outcome_model(_get(cfg, "outcome", "dict"), "outcome"),
        "fspec": _parse_feature_spec(_get(cfg, "features", "dict"), "features"),
        "methods": _gate_methods(cfg),
        "traits_per_block": _get(cfg, "traits_per_block", "int", 2),
        "covariate_cols": _get(cfg, "covariate_cols", "int", 0),
        "draws": _get(cfg, "draws", "int"),
        "truth_draws": _get(cfg, "truth_draws", "int", 200),
        "cluster_se": _get(cfg, "cluster_se", "bool", False),
    }
    reps = _get(cfg, "replications", "int")
    if reps < 1:
        raise ValidationError("replications", "need at least one replication")
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            chunks = list(pool.map(lambda r: _gate_replication(r, seed, spec), range(reps)))
    else:
        chunks = [_gate_replication(r, seed, spec) for r in range(reps)]
    records = [rec for chunk in chunks for rec in chunk]
    by_method = {}
    for rec in records:
        if rec["metric"] in ("error", "covered"):
            by_method.setdefault((rec["method"], rec["metric"]), []).append(rec["value"])
    for (method, metric), vals in sorted(by_method.items()):
        vals = np.asarray(vals, dtype=np.float64)
        if metric == "error":
            ok = np.isfinite(vals)
            if ok.any():
                records.append(
                    {
                        "replication": -1,
                        "method": method,
                        "metric": "bias",
                        "value": float(vals[ok].mean()),
                    }
                )
                records.append(
                    {
                        "replication": -1,
                        "method": method,
                        "metric": "rmse",
                        "value": float(np.sqrt((vals[ok] ** 2).mean())),
                    }
                )
        else:
            records.append(
                {
                    "replication": -1,
                    "method": method,
                    "metric": "coverage",
                    "value": float(vals.mean()),
                }
            )
    return records


def cmd_gate(cfg, threads):
    records = run_gate_study(cfg, threads)
    fileio.write_result_table(_out_path(cfg, "output.table"), records, cfg)


def _design_clusters(cfg, memberships):
    labels = _resolve_labels(cfg.get("clusters", _MISSING), "clusters", memberships)
    tspec = _get(cfg, "saturations", "dict", None)
    grid = budget = None
    if tspec is not None:
        if "grid" in tspec:
            grid = tuple(tuple(float(t) for t in row) for row in _get(tspec, "grid", "list"))
        if "budget" in tspec:
            budget = float(_get(tspec, "budget", "number"))
    try:
        return DesignClusters(labels, grid=grid, budget=budget)
    except ValueError as exc:
        raise ValidationError("clusters", str(exc)) from exc


def cmd_design_saturation(cfg, threads):
    seed = _get(cfg, "seed", "int")
    params = _load_estimate_model(cfg, "estimate")
    partial = _load_partial(cfg, "data")
    clusters = _design_clusters(cfg, getattr(params, "memberships", None))
    fspec = _parse_feature_spec(_get(cfg, "features", "dict"), "features")
    contrast = np.asarray(_get(cfg, "contrast", "list"), dtype=np.float64)
    if contrast.shape[0] != fspec.width:
        raise ValidationError("contrast", "length must match the feature count")
    noise = _parse_noise(_get(cfg, "noise", "dict", None))
    ll = _get(cfg, "draws", "int")
    rr = _get(cfg, "assignment_draws", "int")
    penalty = _get(cfg, "penalty", "number", None)
    covariates = None
    if "covariates" in cfg:
        covariates = fileio.read_covariates_csv(_get_path(cfg, "covariates"))

    def objective(tau):
        return eval_saturation_variance(
            tau,
            clusters,
            params,
            partial,
            fspec,
            contrast,
            noise=noise,
            l=ll,
            r=rr,
            rng_seed=substream(seed, 71),
            covariates=covariates,
            penalty=penalty,
        )

    tau_best, trace = bayes_opt_saturation(
        objective,
        clusters,
        _get(cfg, "n0", "int"),
        _get(cfg, "N0", "int"),
        kappa=float(_get(cfg, "kappa", "number", 2.0)),
        rng_seed=substream(seed, 72),
    )
    fileio.dump_json(
        {
            "best_tau": tau_best,
            "best_value": min(t["value"] for t in trace),
            "trace": trace,
        },
        _out_path(cfg, "output.design"),
    )


def cmd_seed_optimal(cfg, threads):
    seed = _get(cfg, "seed", "int")
    params = _load_estimate_model(cfg, "estimate")
    partial = _load_partial(cfg, "data")
    clusters = _design_clusters(cfg, getattr(params, "memberships", None))
    model = _parse_outcome_model(_get(cfg, "outcome", "dict"), "outcome")
    covariates = None
    if "covariates" in cfg:
        covariates = fileio.read_covariates_csv(_get_path(cfg, "covariates"))
    result = optimal_seeding(
        model,
        params,
        partial,
        _get(cfg, "budget", "int"),
        clusters,
        _get(cfg, "draws", "int"),
        substream(seed, 73),
        covariates=covariates,
    )
    fileio.dump_json(
        {
            "allocation": list(result.allocation),
            "mean_outcome": result.mean_outcome,
            "se": result.se,
            "trace": result.trace,
            "skipped": [list(s) for s in result.skipped],
        },
        _out_path(cfg, "output.seeding"),
    )


def cmd_bootstrap(cfg, threads):
    seed = _get(cfg, "seed", "int")
    est = fileio.read_estimate_json(_get_path(cfg, "estimate"))
    traits = _load_traits(cfg, "traits")
    result = bootstrap_ard(
        est,
        traits,
        _get(cfg, "replicates", "int"),
        substream(seed, 74),
        constrained=_get(cfg, "constrained", "bool", True),
    )
    fileio.dump_json(
        {
            "replicates": [fileio.estimate_payload(e) for e in result.estimates],
            "n_failed": result.n_failed,
        },
        _out_path(cfg, "output.bootstrap"),
    )


def compare_methods(records, baseline, challenger, metric, summary="mean", b=1000, rng_seed=0):
    """Ratio of a per-replication metric between two methods.

    Pairs values by replication id, summarizes each method (mean, or root
    mean square for error-like rows), and bootstraps replications for a
    95% interval on the ratio challenger / baseline.
    """
    values = {}
    for rec in records:
        if rec["metric"] == metric and rec["method"] in (baseline, challenger):
            values.setdefault(rec["method"], {})[rec["replication"]] = rec["value"]
    for method in (baseline, challenger):
        if method not in values:
            raise ValidationError("compare", f"method {method!r} has no {metric!r} rows")
    shared = sorted(set(values[baseline]) & set(values[challenger]))
    shared = [r for r in shared if r >= 0]
    if not shared:
        raise ValidationError("compare", "no shared replications between methods")
    vb = np.array([values[baseline][r] for r in shared])
    vc = np.array([values[challenger][r] for r in shared])

    if summary == "mean":
        agg = lambda v: v.mean()  # noqa: E731
    elif summary == "rmse":
        agg = lambda v: np.sqrt((v**2).mean())  # noqa: E731
    else:
        raise ValidationError("summary", f"unknown summary {summary!r}")

    def ratio_of(idx):
        denom = agg(vb[idx])
        if denom == 0:
            raise NumericalError("baseline summary is zero")
        return float(agg(vc[idx]) / denom)

    point = ratio_of(np.arange(len(shared)))
    rng = generator(rng_seed, 75)
    draws = np.array(
        [ratio_of(rng.integers(len(shared), size=len(shared))) for _ in range(b)]
    )
    lo, hi = np.percentile(draws, [2.5, 97.5])
    return {
        "ratio": point,
        "ci_low": float(lo),
        "ci_high": float(hi),
        "baseline": baseline,
        "challenger": challenger,
        "metric": metric,
        "summary": summary,
        "n_replications": len(shared),
    }


def cmd_compare(cfg, threads):
    seed = _get(cfg, "seed", "int")
    records, _ = fileio.read_result_table(_get_path(cfg, "table"))
    result = compare_methods(
        records,
        _get(cfg, "baseline", "str"),
        _get(cfg, "challenger", "str"),
        _get(cfg, "metric", "str"),
        summary=_get(cfg, "summary", "str", "mean"),
        b=_get(cfg, "bootstrap", "int", 1000),
        rng_seed=seed,
    )
    fileio.dump_json(result, _out_path(cfg, "output.comparison"))


_COMMANDS = {
    "simulate": cmd_simulate,
    "ard": cmd_ard,
    "estimate-net": cmd_estimate_net,
    "fit-outcome": cmd_fit_outcome,
    "gate": cmd_gate,
    "design-saturation": cmd_design_saturation,
    "seed-optimal": cmd_seed_optimal,
    "bootstrap": cmd_bootstrap,
    "compare": cmd_compare,
}


def _fail(kind, message, field=None, code=2):
    payload = {"error": kind, "message": message}
    if field is not None:
        payload["field"] = field
    sys.stderr.write(json.dumps(payload, sort_keys=True) + "\n")
    return code


def main(argv=None):
    parser = argparse.ArgumentParser(
        prog="netpartial",
        description="Treatment effects and experiment design from partial network data.",
    )
    parser.add_argument("--threads", type=int, default=1, help="worker pool size")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in _COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("config", help="JSON config path")
    args = parser.parse_args(argv)
    threads = args.threads
    env = os.environ.get("NETPARTIAL_THREADS")
    if env:
        try:
            threads = int(env)
        except ValueError:
            return _fail("validation", "NETPARTIAL_THREADS must be an integer", "NETPARTIAL_THREADS")
    if threads < 1:
        return _fail("validation", "thread count must be positive", "--threads")
    if not os.path.exists(args.config):
        return _fail("validation", f"file not found: {args.config}", "config")
    try:
        with open(args.config) as fh:
            cfg = json.load(fh)
    except json.JSONDecodeError as exc:
        return _fail("validation", f"config is not valid JSON: {exc}", "config")
    if not isinstance(cfg, dict):
        return _fail("validation", "config must be a JSON object", "config")
    try:
        _COMMANDS[args.command](cfg, threads)
    except ValidationError as exc:
        return _fail("validation", str(exc), exc.field)
    except (FileNotFoundError, ValueError) as exc:
        # bad values that only surface once objects are built, e.g. an
        # outcome model that needs covariates the config never provided
        return _fail("validation", str(exc))
    except NumericalError as exc:
        return _fail("numerical", str(exc), code=3)
    return 0


if __name__ == "__main__":
    sys.exit(main())

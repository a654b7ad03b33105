"""Treatment effects under network interference from partial network data.

The package follows one pipeline: observe a slice of the network (ARD
counts, an induced subgraph, a link-traced sample, or a masked edge set),
estimate a generative network model from it, average graph-dependent
regression features over the model conditional on what was observed, and
fit outcome models or search experimental designs on top.
"""

from .design import (
    DesignClusters,
    GpSurrogate,
    NoiseCov,
    SeedingResult,
    bayes_opt_saturation,
    budgeted_allocation,
    design_with_model_uncertainty,
    eval_saturation_variance,
    eval_saturation_variance_z,
    optimal_seeding,
)
from .errors import NumericalError, PositivityError
from .estimation import (
    BootstrapResult,
    NetModelEstimate,
    bootstrap_ard,
    cluster_ard,
    estimate_sbm_from_ard,
    estimate_sbm_from_rds,
    estimate_sbm_from_subgraph,
    fit_beta_model,
    solve_block_probs,
)
from .graphs import (
    BetaParams,
    Graph,
    SbmParams,
    detect_communities,
    matrix_power_apply,
    sample_beta_model,
    sample_model,
    sample_sbm,
)
from .inference import (
    FeatureAverage,
    FitResult,
    GateEstimate,
    WorkingCov,
    average_features,
    dm_estimator,
    draw_graphs,
    fit_linear,
    fit_logistic_em,
    ht_estimator,
    plugin_gate,
    plugin_mean_outcome,
)
from .kernels import HAVE_EXT
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
    build_features,
    compute_exposure,
    simulate_outcomes,
    true_gate,
)
from .partial import (
    ArdMatrix,
    SubgraphSample,
    ard_from_graph,
    ard_of,
    mask_edges,
    overlapping_traits,
    sample_induced_subgraph,
    sample_rds,
    split_traits,
)
from .treatments import BernoulliDesign, ClusterDesign, SaturationDesign

__version__ = "0.1.0"

__all__ = [
    "ArdMatrix",
    "BernoulliDesign",
    "BetaParams",
    "BootstrapResult",
    "ClusterDesign",
    "ComplexContagion",
    "ConfounderSpec",
    "DesignClusters",
    "FeatureAverage",
    "FeatureSpec",
    "FitResult",
    "GateEstimate",
    "GenericLinear",
    "GpSurrogate",
    "Graph",
    "HAVE_EXT",
    "HearingExposure",
    "HearingLogistic",
    "LocalDiffusion",
    "NeighborTreated",
    "NetModelEstimate",
    "NoiseCov",
    "NumericalError",
    "PositivityError",
    "RiskShare",
    "SaturationDesign",
    "SbmParams",
    "SeedingResult",
    "SubgraphSample",
    "TreatedCount",
    "TreatedFraction",
    "UganderLinear",
    "WorkingCov",
    "ard_of",
    "average_features",
    "bayes_opt_saturation",
    "bootstrap_ard",
    "budgeted_allocation",
    "build_features",
    "cluster_ard",
    "compute_exposure",
    "design_with_model_uncertainty",
    "detect_communities",
    "dm_estimator",
    "draw_graphs",
    "estimate_sbm_from_ard",
    "estimate_sbm_from_rds",
    "estimate_sbm_from_subgraph",
    "eval_saturation_variance",
    "eval_saturation_variance_z",
    "fit_beta_model",
    "fit_linear",
    "fit_logistic_em",
    "ard_from_graph",
    "ht_estimator",
    "mask_edges",
    "matrix_power_apply",
    "optimal_seeding",
    "overlapping_traits",
    "plugin_gate",
    "plugin_mean_outcome",
    "sample_beta_model",
    "sample_induced_subgraph",
    "sample_model",
    "sample_rds",
    "sample_sbm",
    "simulate_outcomes",
    "solve_block_probs",
    "split_traits",
    "true_gate",
]

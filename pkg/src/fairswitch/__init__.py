"""Fairness-aware graph generation toolkit.

A small discrete graph-diffusion backbone, a mid-generation attribute-
switching intervention with an analytically optimal switch fraction and a
multi-criteria switch step, optimal-transport graph distances, and a
link-prediction harness measuring the accuracy-fairness trade-off.
"""

from . import _ot
from .diffusion import (
    ChannelMarginals,
    GenerationState,
    LearnedDenoiser,
    NoiseSchedule,
    OracleDenoiser,
    TrainConfig,
    channel_marginals,
    forward_noise,
    generate,
    reverse_step,
    train_denoiser,
)
from .evaluate import (
    EdgeSplit,
    FairnessReport,
    LinkPredictor,
    PairSet,
    PredictorConfig,
    auc,
    fairness_metrics,
    full_universe,
    pareto_frontier,
    split_edges,
    train_link_predictor,
    wasserstein1_empirical,
)
from .fgw import (
    Coupling,
    EntropyReport,
    FGWProblem,
    edge_entropy,
    feature_cost_matrix,
    fgw_between,
    fgw_distance,
    internal_cost_matrix,
)
from .graphs import (
    DensityMatrix,
    EdgePartition,
    Graph,
    clustering_coefficients,
    degrees,
    edge_density_matrix,
    graph_from_json,
    graph_to_json,
    load_graph,
    partition_edges,
    sbm_generate,
)
from .selector import TauObjectiveTable, TauRow, sample_seed, select_tau
from .switching import (
    ImbalanceModel,
    SwitchDistribution,
    SwitchPlan,
    generate_with_switching,
    optimal_rho,
    sample_new_attributes,
    sample_switch_set,
    switch_coefficients,
)

__version__ = "0.1.0"

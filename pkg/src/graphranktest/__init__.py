"""Graph-based rank test for the presence of random effects in clustered data.

Build a similarity graph on the covariates, rank responses by closeness,
and compare the rank mass on within-cluster edges with its exact
permutation-null mean and variance.
"""

from .graph import (
    DisconnectedGraphError,
    SimilarityGraph,
    build_graph,
    build_kmst,
    build_knn,
    compute_distances,
)
from .ranks import compute_normalized_ranks, has_rank_ties
from .simulate import (
    Dataset,
    LmmConfig,
    generate,
    run_calibration,
    run_power,
    run_trials,
    scale_beta_to_snr,
)
from .statistic import (
    ClusterAssignment,
    DegenerateVarianceError,
    GraphRankSummary,
    TestResult,
    condition_diagnostics,
    covariance_ts_tt,
    graph_rank_test,
    moments_ts,
    permutation_pvalue,
    summarize,
    within_cluster_edge_rank,
    within_cluster_edge_ranks,
    z_statistic,
)

__version__ = "0.1.0"

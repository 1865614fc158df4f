"""Adaptive mean estimation from multiple biased sources.

Importing the package pins the BLAS thread pools to one thread (before numpy
ever loads) so Monte Carlo results do not depend on runtime thread counts.
"""

import os as _os

for _var in (
    "OPENBLAS_NUM_THREADS",
    "MKL_NUM_THREADS",
    "OMP_NUM_THREADS",
    "NUMEXPR_NUM_THREADS",
):
    _os.environ.setdefault(_var, "1")

from .model import (  # noqa: E402
    BiasConfiguration,
    HardInstanceSpec,
    LocalEstimates,
    ProblemInstance,
    SampleSizes,
    SplitEstimates,
    make_cluster_config,
    make_hard_instance,
    make_separation1_config,
    make_separation2_config,
    reuse_as_splits,
    sample_estimates,
    sample_split_estimates,
)
from .oracle import (  # noqa: E402
    OracleRateResult,
    SubsetMask,
    check_optimal_subset,
    oracle_estimate,
    oracle_rate,
)
from .estimators import (  # noqa: E402
    CandidateFamily,
    ConfidenceBall,
    EliminationParams,
    TargetSplit,
    default_delta_intersection,
    elimination_estimator,
    full_subset_family,
    intersection_estimator,
    model_selection,
    naive,
    practical_clustering_estimator,
    prefix_family,
    sample_split_clustering,
    two_cluster_adaptive,
    two_source_structured,
)
from .knn_demo import (  # noqa: E402
    RegressionSample,
    adaptive_knn,
    fixed_design_sample,
    holder_function,
    rate_sweep,
)
from .harness import (  # noqa: E402
    ExperimentSpec,
    ResultRow,
    adaptation_cost_curve,
    parse_config,
    reproduce_figures,
    run_experiment,
    write_rows,
)

__version__ = "0.1.0"

__all__ = [
    "BiasConfiguration",
    "CandidateFamily",
    "ConfidenceBall",
    "EliminationParams",
    "ExperimentSpec",
    "HardInstanceSpec",
    "LocalEstimates",
    "OracleRateResult",
    "ProblemInstance",
    "RegressionSample",
    "ResultRow",
    "SampleSizes",
    "SplitEstimates",
    "SubsetMask",
    "TargetSplit",
    "adaptation_cost_curve",
    "adaptive_knn",
    "check_optimal_subset",
    "default_delta_intersection",
    "elimination_estimator",
    "fixed_design_sample",
    "full_subset_family",
    "holder_function",
    "intersection_estimator",
    "make_cluster_config",
    "make_hard_instance",
    "make_separation1_config",
    "make_separation2_config",
    "model_selection",
    "naive",
    "oracle_estimate",
    "oracle_rate",
    "parse_config",
    "practical_clustering_estimator",
    "prefix_family",
    "rate_sweep",
    "reproduce_figures",
    "reuse_as_splits",
    "run_experiment",
    "sample_estimates",
    "sample_split_clustering",
    "sample_split_estimates",
    "two_cluster_adaptive",
    "two_source_structured",
    "write_rows",
]
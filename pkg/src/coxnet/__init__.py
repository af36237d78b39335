"""Penalized Cox proportional-hazards regression: elastic net and adaptive elastic net.

Set ``COXNET_DISABLE_NUMBA=1`` to run the pure-numpy kernels instead of the
compiled ones, and ``COXNET_THREADS`` to cap the worker threads used for CV
folds and Monte Carlo replicates (0 = one per CPU).
"""

import sys
from importlib.metadata import PackageNotFoundError, version

try:
    __version__ = version("artifact")
except PackageNotFoundError:  # running from a source tree
    __version__ = "0.1.0"

from .diagnostics import (
    GroupingReport,
    SingularInformationError,
    asymptotic_covariance,
    estimated_fisher_information,
    grouping_bound,
    grouping_distance,
    identified_covariance,
    sparsity_report,
)
from .model_selection import (
    CrossValidationError,
    CvConfig,
    CvReport,
    cross_validated_fit,
    cv_score,
    kfold_split,
    select_lambda,
)
from .partial_likelihood import (
    LikelihoodContext,
    LikelihoodOverflowError,
    neg_log_partial_likelihood,
    observed_information,
    schoenfeld_residuals,
    score,
)
from .penalty import PenaltySpec, ZeroFirstStageError, adaptive_weights, penalty_value, soft_threshold
from .simulation import (
    OracleReport,
    OracleSchedule,
    SimConfig,
    Table4Report,
    generate_design,
    generate_survival,
    run_grouping_experiment,
    run_oracle_monte_carlo,
    run_table4,
    simulate,
)
from .solver import (
    AenFit,
    FitConfig,
    FitResult,
    SeparationError,
    check_kkt,
    compute_lambda_max,
    fit_adaptive_elastic_net,
    fit_penalized_cox,
    regularization_path,
)
from .survival_core import (
    DataValidationError,
    RiskSetIndex,
    StandardizationInfo,
    SurvivalDataset,
    SurvivalRecord,
    build_risk_sets,
    destandardize_coefficients,
    standardize,
    validate_dataset,
)

__all__ = sorted(
    name for name, obj in globals().items()
    if not name.startswith("_") and not isinstance(obj, type(sys)) and name not in ("version", "PackageNotFoundError")
)

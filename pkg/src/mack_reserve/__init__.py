"""Mack chain ladder, Mack-type bootstraps and a simulation harness for reserve risk."""

__version__ = "0.1.0"

from .bootstrap import (  # noqa: E402
    BootstrapRun,
    MackBootstrap,
    Method,
    alternative_mack_bootstrap,
    build_residual_pool,
    intermediate_mack_bootstrap,
    original_mack_bootstrap,
    prediction_interval,
    run_bootstrap,
)
from .evaluation import (  # noqa: E402
    CellSummary,
    KsResult,
    empirical_moments,
    estimation_variance_limit_tilde,
    ks_two_sample,
    process_variance_limit,
    rmmse,
)
from .families import CondFamily, FamilyKind, MomentSpec, params_from_moments, sample  # noqa: E402
from .mack import MackChainLadder, MackFit, PredictiveRoot, fit_mack, predictive_root  # noqa: E402
from .simulation import (  # noqa: E402
    DgpConfig,
    ExperimentGrid,
    ParamSequences,
    generate_triangle,
    oracle_predictive_roots,
    param_sequences,
    run_experiment,
)
from .triangle import DevTriangle, diagonal, factor_grid, parse_triangle, read_triangle  # noqa: E402

__all__ = [
    "BootstrapRun", "CellSummary", "CondFamily", "DevTriangle", "DgpConfig", "ExperimentGrid",
    "FamilyKind", "KsResult", "MackBootstrap", "MackChainLadder", "MackFit", "Method", "MomentSpec",
    "ParamSequences", "PredictiveRoot", "alternative_mack_bootstrap", "build_residual_pool",
    "diagonal", "empirical_moments", "estimation_variance_limit_tilde", "factor_grid", "fit_mack",
    "generate_triangle", "intermediate_mack_bootstrap", "ks_two_sample", "oracle_predictive_roots",
    "original_mack_bootstrap", "param_sequences", "params_from_moments", "parse_triangle",
    "prediction_interval", "predictive_root", "process_variance_limit", "read_triangle", "rmmse",
    "run_bootstrap", "run_experiment", "sample",
]

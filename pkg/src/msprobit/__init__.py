"""Bayesian ordinal regression with one shared latent predictor across
several ordinal annotation scales, fit by data-augmented MCMC."""

from .distributions import (
    Interval,
    log_interval_mass,
    sample_mvn_from_precision,
    sample_truncated_normal,
    sample_truncated_normal_many,
    std_normal_cdf,
    std_normal_quantile,
)
from .errors import (
    ConfigError,
    DatasetValidationError,
    DegeneracyError,
    InitializationError,
    LinearAlgebraError,
    MsprobitError,
    NumericalError,
    SamplerPanicError,
    SimulationError,
    StratificationError,
    TuningError,
    UndefinedCorrelationError,
    ValidationError,
)
from .metrics import (
    ConfusionMatrix,
    EvaluationReport,
    F1Result,
    classify,
    evaluate_splits,
    f1_scores,
    harmonic_mean,
    kendall_tau_b,
    predict_class_probs,
    rank_score,
    rank_score_draws,
)
from .model import (
    ChainConfig,
    Dataset,
    LatentState,
    ParamDraw,
    Prior,
    ScaleSpec,
    default_init,
    evenly_spaced_thresholds,
    validate_dataset,
)
from .sampler import (
    DrawSet,
    draw_beta,
    draw_latents,
    gamma_log_acceptance_ratio,
    mcse_mean,
    mh_update_gammas,
    run_chain,
    run_chains,
    tune_proposal,
)
from .simulate import (
    ExperimentConfig,
    ExperimentReport,
    SimTruth,
    per_draw_rmse,
    rmse,
    run_experiment,
    simulate_dataset,
)

__version__ = "0.1.0"

__all__ = [
    "ChainConfig",
    "ConfigError",
    "ConfusionMatrix",
    "Dataset",
    "DatasetValidationError",
    "DegeneracyError",
    "DrawSet",
    "EvaluationReport",
    "ExperimentConfig",
    "ExperimentReport",
    "F1Result",
    "InitializationError",
    "Interval",
    "LatentState",
    "LinearAlgebraError",
    "MsprobitError",
    "NumericalError",
    "ParamDraw",
    "Prior",
    "SamplerPanicError",
    "ScaleSpec",
    "SimTruth",
    "SimulationError",
    "StratificationError",
    "TuningError",
    "UndefinedCorrelationError",
    "ValidationError",
    "classify",
    "default_init",
    "draw_beta",
    "draw_latents",
    "evaluate_splits",
    "evenly_spaced_thresholds",
    "f1_scores",
    "gamma_log_acceptance_ratio",
    "harmonic_mean",
    "kendall_tau_b",
    "log_interval_mass",
    "mcse_mean",
    "mh_update_gammas",
    "per_draw_rmse",
    "predict_class_probs",
    "rank_score",
    "rank_score_draws",
    "rmse",
    "run_chain",
    "run_chains",
    "run_experiment",
    "sample_mvn_from_precision",
    "sample_truncated_normal",
    "sample_truncated_normal_many",
    "simulate_dataset",
    "std_normal_cdf",
    "std_normal_quantile",
    "tune_proposal",
    "validate_dataset",
]

"""Numerical laboratory for random-attention kernel smoothing.

Closed-form second-moment kernels of untrained self-attention, Monte Carlo
validation, label-smoothing baselines, structure-aware evaluation metrics,
and a synthetic hypnogram test-bed tied together by a reproducible
experiment harness.
"""

from .attention import (
    AttentionMatrix,
    EncoderConfig,
    attention_apply,
    attention_scores,
    build_encoder_weights,
    empirical_kernel,
    encoder_forward,
    layer_norm_rows,
    softmax_rows,
)
from .dataio import DatasetError, load_dataset, save_dataset
from .harness import (
    COMPONENT_BUNDLES,
    SMOOTHERS,
    PipelineResult,
    RunConfig,
    SweepSpec,
    config_digest,
    correlation_study,
    load_run_config,
    run_pipeline,
    run_sweep,
)
from .initializers import (
    InitScheme,
    ProjectionSet,
    analytic_variance,
    init_matrix,
    make_projection_set,
    parse_scheme,
    scheme_label,
)
from .metrics import EvalReport, accuracy, lsii, lsii_pooled, weighted_f1, wte, wte_pooled
from .montecarlo import (
    KernelValidationReport,
    LogitConcentrationReport,
    centered_unit_sequence,
    dk_sweep,
    kernel_mse,
    kernel_pearson,
    logit_concentration,
    monte_carlo_kernel,
)
from .rapk import (
    RapkResult,
    compute_rapk,
    linearized_softmax,
    rapk_c1_centered,
    rapk_coefficients,
    rapk_kernel,
)
from .seeding import generator, mix_seed, splitmix64
from .sequences import FeatureSequence, ProbSequence, StageSequence
from .smoothers import (
    CentroidClassifier,
    classify,
    fit_centroids,
    fixed_attention_smooth,
    majority_filter_smooth,
    moving_average_smooth,
    random_transformer_smooth,
    window_partition,
)
from .synthgen import SynthConfig, SynthDataset, make_dataset

__version__ = "0.1.0"

__all__ = [
    "AttentionMatrix",
    "CentroidClassifier",
    "COMPONENT_BUNDLES",
    "DatasetError",
    "EncoderConfig",
    "EvalReport",
    "FeatureSequence",
    "InitScheme",
    "KernelValidationReport",
    "LogitConcentrationReport",
    "PipelineResult",
    "ProbSequence",
    "ProjectionSet",
    "RapkResult",
    "RunConfig",
    "SMOOTHERS",
    "StageSequence",
    "SweepSpec",
    "SynthConfig",
    "SynthDataset",
    "accuracy",
    "analytic_variance",
    "attention_apply",
    "attention_scores",
    "build_encoder_weights",
    "centered_unit_sequence",
    "classify",
    "compute_rapk",
    "config_digest",
    "correlation_study",
    "dk_sweep",
    "empirical_kernel",
    "encoder_forward",
    "fit_centroids",
    "fixed_attention_smooth",
    "generator",
    "init_matrix",
    "kernel_mse",
    "kernel_pearson",
    "layer_norm_rows",
    "linearized_softmax",
    "load_dataset",
    "load_run_config",
    "logit_concentration",
    "lsii",
    "lsii_pooled",
    "majority_filter_smooth",
    "make_dataset",
    "make_projection_set",
    "mix_seed",
    "monte_carlo_kernel",
    "moving_average_smooth",
    "parse_scheme",
    "random_transformer_smooth",
    "rapk_c1_centered",
    "rapk_coefficients",
    "rapk_kernel",
    "run_pipeline",
    "run_sweep",
    "save_dataset",
    "scheme_label",
    "softmax_rows",
    "splitmix64",
    "weighted_f1",
    "window_partition",
    "wte",
    "wte_pooled",
]

"""Gumbel-Max counterfactual inference and off-policy evaluation."""

from ._core import (
    ConfigError,
    DataError,
    Explorer,
    ObservationImpossible,
    SamplingFailure,
    ServiceError,
    counterfactual_counts,
    counterfactual_distribution_ordered,
    default_config,
    derive_seed,
    gumbel_argmax,
    gumbel_from_uniform,
    monotonicity_check,
    nonid_demo,
    posterior_noise,
    run_pipeline,
    sample_gumbel,
    simulate,
    stability_admissible,
    truncated_gumbel,
)

__version__ = "0.1.0"

__all__ = [
    "ConfigError",
    "DataError",
    "Explorer",
    "ObservationImpossible",
    "SamplingFailure",
    "ServiceError",
    "counterfactual_counts",
    "counterfactual_distribution_ordered",
    "default_config",
    "derive_seed",
    "gumbel_argmax",
    "gumbel_from_uniform",
    "monotonicity_check",
    "nonid_demo",
    "posterior_noise",
    "run_pipeline",
    "sample_gumbel",
    "simulate",
    "stability_admissible",
    "truncated_gumbel",
]

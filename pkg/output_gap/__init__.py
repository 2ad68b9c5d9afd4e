"""Bayesian unobserved-components toolkit for output-gap estimation."""
from output_gap.errors import (
    OutputGapError,
    StructuralError,
    DomainError,
    NumericalError,
    DegenerateChainError,
    SeriesValidationError,
    SamplerError,
)
from output_gap.statespace import (
    StateSpaceModel,
    FilterOutput,
    SmootherOutput,
    kalman_filter,
    kalman_smoother,
    simulation_smoother,
)
from output_gap.models import (
    Variate,
    TrendType,
    ModelSpec,
    ParameterVector,
    DerivedEffects,
    cycle_coefficients,
    build_model,
    simulate_data,
)
from output_gap.priors import (
    PriorConfig,
    default_priors,
    default_table1,
    log_prior_density,
    sample_prior,
)
from output_gap.sampler import ChainSettings, PosteriorDraws, run_chain, run_chains

__all__ = [
    "OutputGapError",
    "StructuralError",
    "DomainError",
    "NumericalError",
    "DegenerateChainError",
    "SeriesValidationError",
    "SamplerError",
    "StateSpaceModel",
    "FilterOutput",
    "SmootherOutput",
    "kalman_filter",
    "kalman_smoother",
    "simulation_smoother",
    "Variate",
    "TrendType",
    "ModelSpec",
    "ParameterVector",
    "DerivedEffects",
    "cycle_coefficients",
    "build_model",
    "simulate_data",
    "PriorConfig",
    "default_priors",
    "default_table1",
    "log_prior_density",
    "sample_prior",
    "ChainSettings",
    "PosteriorDraws",
    "run_chain",
    "run_chains",
]

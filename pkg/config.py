"""
Configuration management for the output-gap toolkit.
Loads settings from environment variables (prefixed OG_) or a local .env file.
"""
from pydantic_settings import BaseSettings
from typing import Optional


class Settings(BaseSettings):
    """Application settings loaded from environment variables."""

    # Application Settings
    environment: str = "development"
    log_level: str = "INFO"
    output_dir: str = "output"

    # State-space initialization
    kappa_init: float = 1e7  # diffuse prior scale used by the filter
    simulation_kappa: float = 1.0  # initial-state scale for synthetic data

    # Adaptive sampler
    adaptation_constant: float = 10.0
    adaptation_exponent: float = 0.5
    projection_floor: float = 1e-4
    max_relative_step: float = 0.5  # cap on one Inverse-Gamma update, relative to (a, b)
    proposal_spread: float = 4.0  # variance inflation of conditional starting proposals
    lambda_scale: str = "pi"  # "pi" or "two_pi"
    default_seed: Optional[int] = None
    log_every: int = 1000

    # Diagnostics
    hpd_level: float = 0.95
    autocorrelation_max_lag: int = 50
    hp_smoothing: float = 1600.0

    class Config:
        env_file = ".env"
        env_prefix = "OG_"
        case_sensitive = False
        extra = "ignore"


# Global settings instance
settings = Settings()

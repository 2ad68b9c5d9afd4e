"""
Run-configuration schema for the output-gap toolkit.
Mirrors the JSON config file accepted by ``og_cli.py estimate --config``.
"""
from typing import Dict, Literal, Optional

from pydantic import BaseModel, Field, field_validator, model_validator

from config import settings
from output_gap.errors import StructuralError
from output_gap.models import PARAMETER_NAMES, ModelSpec
from output_gap.priors import LambdaScale, PriorConfig, PriorFamily, default_priors
from output_gap.sampler import ChainSettings


class PriorOverride(BaseModel):
    """Replacement hyperparameters for one parameter's prior."""
    family: Optional[PriorFamily] = Field(None, description="Prior family; keeps the default when omitted")
    a: Optional[float] = Field(None, description="Shape (IG, Beta) or mean (Gaussian)")
    b: Optional[float] = Field(None, gt=0, description="Scale (IG), second shape (Beta) or variance (Gaussian)")


class RunConfig(BaseModel):
    """
    One estimation run.

    Stored verbatim in manifest.json so a run can be replayed bit for bit.
    """
    spec: str = Field(..., description="Model specification label, e.g. uni-lt or biv-irw")
    gdp_path: str = Field(..., description="CSV file with quarterly real GDP levels")
    cpi_path: Optional[str] = Field(None, description="CSV file with quarterly CPI levels (bivariate specs)")
    output_dir: str = Field(settings.output_dir, description="Directory receiving the run artifacts")
    n_iter: int = Field(..., gt=0, description="Total sampler iterations, burn-in included")
    burn_in: int = Field(0, ge=0, description="Iterations discarded before storing draws")
    thin: int = Field(1, ge=1, description="Keep every thin-th post-burn-in draw")
    seed: Optional[int] = Field(None, ge=0, lt=2 ** 64, description="Unsigned 64-bit root seed")
    C: float = Field(settings.adaptation_constant, gt=0, description="Adaptation constant in 1/(C i^0.5)")
    lambda_scale: LambdaScale = Field(
        LambdaScale(settings.lambda_scale), description="Upper end of the cycle-frequency support"
    )
    prior_overrides: Dict[str, PriorOverride] = Field(default_factory=dict, description="Per-parameter prior changes")
    chains: int = Field(1, ge=1, description="Number of independent chains")
    exact_tau_conditional: bool = Field(
        False, description="Use the joint cycle/core-inflation target for theta1 and sigma2_xi"
    )
    proposal_init: Literal["conditional", "prior"] = Field(
        "conditional", description="Start MH proposals at block conditional moments or at the priors"
    )
    hpd_level: float = Field(settings.hpd_level, gt=0, lt=1, description="Credible level of HPD intervals and bands")

    @field_validator("spec")
    @classmethod
    def _known_spec(cls, value: str) -> str:
        try:
            return ModelSpec.from_label(value).label
        except StructuralError as exc:
            raise ValueError(str(exc))

    @field_validator("prior_overrides")
    @classmethod
    def _known_parameters(cls, value: Dict[str, PriorOverride]) -> Dict[str, PriorOverride]:
        unknown = set(value) - set(PARAMETER_NAMES)
        if unknown:
            raise ValueError(f"Prior overrides for unknown parameters: {', '.join(sorted(unknown))}")
        return value

    @model_validator(mode="after")
    def _consistent(self) -> "RunConfig":
        if self.burn_in >= self.n_iter:
            raise ValueError(f"burn_in ({self.burn_in}) must be smaller than n_iter ({self.n_iter})")
        if (self.n_iter - self.burn_in) % self.thin:
            raise ValueError("n_iter - burn_in must be a multiple of thin")
        if self.model_spec().is_bivariate and not self.cpi_path:
            raise ValueError(f"{self.spec} needs a CPI series (cpi_path)")
        return self

    def model_spec(self) -> ModelSpec:
        return ModelSpec.from_label(self.spec)

    def prior_config(self) -> PriorConfig:
        prior = default_priors(self.lambda_scale)
        if self.prior_overrides:
            prior = prior.with_overrides({
                name: override.model_dump(exclude_none=True, mode="json")
                for name, override in self.prior_overrides.items()
            })
        return prior.for_spec(self.model_spec())

    def to_chain_settings(self) -> ChainSettings:
        return ChainSettings(
            n_iter=self.n_iter,
            burn_in=self.burn_in,
            thin=self.thin,
            seed=self.seed,
            C=self.C,
            exact_tau_conditional=self.exact_tau_conditional,
            proposal_init=self.proposal_init,
        )

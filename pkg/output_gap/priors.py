"""
Prior configuration for the output-gap parameters.

Block-independent proper priors: Inverse-Gamma (shape-scale, mean b/(a-1))
for variances, Beta on (0, s) for the cycle amplitude and frequency, Gaussian
for the Phillips loadings and the drift.
"""
import logging
from dataclasses import dataclass, field, replace
from enum import Enum
from typing import Dict, Optional, Tuple

import numpy as np
import pandas as pd
from scipy import stats

from output_gap.errors import DomainError, StructuralError
from output_gap.models import PARAMETER_NAMES, ModelSpec, ParameterVector

logger = logging.getLogger(__name__)


class PriorFamily(str, Enum):
    """Supported prior / proposal families."""
    INVERSE_GAMMA = "inverse_gamma"
    BETA = "beta"
    GAUSSIAN = "gaussian"


class LambdaScale(str, Enum):
    """Upper end s of the cycle-frequency support (0, s)."""
    PI = "pi"
    TWO_PI = "two_pi"

    @property
    def upper(self) -> float:
        return np.pi if self is LambdaScale.PI else 2.0 * np.pi


@dataclass(frozen=True)
class PriorEntry:
    """
    One prior block.

    For InverseGamma and Beta, (a, b) are shape parameters (IG b is the scale);
    for Gaussian, a is the mean and b the variance. ``scale`` stretches the
    Beta support to (0, scale).
    """

    family: PriorFamily
    a: float
    b: float
    scale: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, "family", PriorFamily(self.family))
        if not (np.isfinite(self.a) and np.isfinite(self.b)):
            raise DomainError(f"{self.family.value} hyperparameters must be finite")
        if self.b <= 0 or (self.family is not PriorFamily.GAUSSIAN and self.a <= 0):
            raise DomainError(
                f"{self.family.value} hyperparameters must be positive, got a={self.a}, b={self.b}"
            )
        if self.scale <= 0:
            raise DomainError(f"support scale must be positive, got {self.scale}")

    @property
    def distribution(self):
        """Frozen scipy.stats distribution."""
        if self.family is PriorFamily.INVERSE_GAMMA:
            return stats.invgamma(self.a, scale=self.b)
        if self.family is PriorFamily.BETA:
            return stats.beta(self.a, self.b, scale=self.scale)
        return stats.norm(loc=self.a, scale=np.sqrt(self.b))

    def in_support(self, x: float) -> bool:
        if not np.isfinite(x):
            return False
        if self.family is PriorFamily.INVERSE_GAMMA:
            return x > 0
        if self.family is PriorFamily.BETA:
            return 0 < x < self.scale
        return True

    def logpdf(self, x: float) -> float:
        if not self.in_support(x):
            return -np.inf
        return float(self.distribution.logpdf(x))

    def sample(self, rng: np.random.Generator, size: Optional[int] = None):
        return self.distribution.rvs(size=size, random_state=rng)

    def mean(self) -> float:
        return float(self.distribution.mean())

    def std(self) -> float:
        return float(self.distribution.std())

    def to_dict(self) -> Dict:
        return {"family": self.family.value, "a": self.a, "b": self.b, "scale": self.scale}

    @classmethod
    def from_dict(cls, data: Dict) -> "PriorEntry":
        return cls(
            family=PriorFamily(data["family"]),
            a=float(data["a"]),
            b=float(data["b"]),
            scale=float(data.get("scale", 1.0)),
        )


# Default hyperparameters for the general bivariate model.
DEFAULT_HYPERPARAMETERS: Dict[str, Tuple[PriorFamily, float, float]] = {
    "sigma2_eps": (PriorFamily.INVERSE_GAMMA, 3.0, 3.6e-3),
    "sigma2_eta": (PriorFamily.INVERSE_GAMMA, 3.0, 4.0e-3),
    "sigma2_zeta": (PriorFamily.INVERSE_GAMMA, 3.0, 4.0e-4),
    "sigma2_kappa": (PriorFamily.INVERSE_GAMMA, 2.40, 2.82),
    "rho": (PriorFamily.BETA, 2.0, 3.0),
    "lam": (PriorFamily.BETA, 5.54, 27.72),
    "sigma2_vareps": (PriorFamily.INVERSE_GAMMA, 3.0, 3.2e-4),
    "sigma2_xi": (PriorFamily.INVERSE_GAMMA, 3.0, 3.2e-4),
    "theta0": (PriorFamily.GAUSSIAN, 0.0, 100.0),
    "theta1": (PriorFamily.GAUSSIAN, 0.0, 100.0),
    "drift": (PriorFamily.GAUSSIAN, 0.0, 100.0),
}


@dataclass(frozen=True)
class PriorConfig:
    """Per-parameter priors, the lambda support scale and the active mask."""

    entries: Dict[str, PriorEntry]
    lambda_scale: LambdaScale = LambdaScale.PI
    active: Tuple[str, ...] = field(default=PARAMETER_NAMES)

    def __post_init__(self):
        object.__setattr__(self, "lambda_scale", LambdaScale(self.lambda_scale))
        object.__setattr__(self, "active", tuple(self.active))
        unknown = set(self.entries) - set(PARAMETER_NAMES)
        if unknown:
            raise StructuralError(f"Priors given for unknown parameters: {sorted(unknown)}")
        missing = [name for name in self.active if name not in self.entries]
        if missing:
            raise StructuralError(f"No prior for active parameters: {missing}")
        for name in ("rho", "lam"):
            entry = self.entries.get(name)
            if entry is not None and entry.family is not PriorFamily.BETA:
                raise StructuralError(f"{name} needs a Beta prior, got {entry.family.value}")
        lam = self.entries.get("lam")
        if lam is not None and not np.isclose(lam.scale, self.lambda_scale.upper):
            raise StructuralError(
                f"lam prior support (0, {lam.scale:.6g}) does not match scale {self.lambda_scale.value}"
            )

    @property
    def lam_upper(self) -> float:
        return self.lambda_scale.upper

    def entry(self, name: str) -> PriorEntry:
        return self.entries[name]

    def for_spec(self, spec: ModelSpec) -> "PriorConfig":
        """Restrict the active mask to the parameters a specification estimates."""
        return replace(self, active=spec.active_parameters)

    def with_lambda_scale(self, lambda_scale: LambdaScale) -> "PriorConfig":
        lambda_scale = LambdaScale(lambda_scale)
        entries = dict(self.entries)
        if "lam" in entries:
            entries["lam"] = replace(entries["lam"], scale=lambda_scale.upper)
        return replace(self, entries=entries, lambda_scale=lambda_scale)

    def with_overrides(self, overrides: Dict[str, Dict]) -> "PriorConfig":
        """
        Replace hyperparameters for selected parameters.

        Args:
            overrides: {name: {"a": ..., "b": ..., "family": ...}}; omitted keys keep
                their current value
        """
        entries = dict(self.entries)
        for name, change in overrides.items():
            if name not in PARAMETER_NAMES:
                raise StructuralError(f"Cannot override prior of unknown parameter '{name}'")
            current = entries.get(name)
            data = current.to_dict() if current else {"scale": 1.0}
            data.update({k: v for k, v in change.items() if v is not None})
            if name == "lam":
                data["scale"] = self.lam_upper
            entries[name] = PriorEntry.from_dict(data)
            logger.info(f"Prior override for {name}: {entries[name].to_dict()}")
        return replace(self, entries=entries)

    def to_dict(self) -> Dict:
        return {
            "lambda_scale": self.lambda_scale.value,
            "active": list(self.active),
            "entries": {name: entry.to_dict() for name, entry in self.entries.items()},
        }

    @classmethod
    def from_dict(cls, data: Dict) -> "PriorConfig":
        return cls(
            entries={name: PriorEntry.from_dict(e) for name, e in data["entries"].items()},
            lambda_scale=LambdaScale(data.get("lambda_scale", LambdaScale.PI.value)),
            active=tuple(data.get("active", PARAMETER_NAMES)),
        )


def default_priors(lambda_scale: LambdaScale = LambdaScale.PI) -> PriorConfig:
    """Default priors; the drift entry is N(0, 100)."""
    lambda_scale = LambdaScale(lambda_scale)
    entries = {}
    for name, (family, a, b) in DEFAULT_HYPERPARAMETERS.items():
        scale = lambda_scale.upper if name == "lam" else 1.0
        entries[name] = PriorEntry(family, a, b, scale)
    return PriorConfig(entries=entries, lambda_scale=lambda_scale)


default_table1 = default_priors


def log_prior_density(params: ParameterVector, cfg: PriorConfig) -> float:
    """Sum of active block log densities; -inf outside the support."""
    total = 0.0
    for name in cfg.active:
        value = cfg.entries[name].logpdf(getattr(params, name))
        if value == -np.inf:
            return -np.inf
        total += value
    return float(total)


def sample_prior(cfg: PriorConfig, rng: np.random.Generator) -> ParameterVector:
    """Independent draw of every active block, in canonical parameter order."""
    values = {}
    for name in PARAMETER_NAMES:
        if name in cfg.active:
            values[name] = float(cfg.entries[name].sample(rng))
    return ParameterVector(**values)


def prior_mean_vector(cfg: PriorConfig) -> ParameterVector:
    """Prior means of the active blocks (the default chain start)."""
    return ParameterVector(**{name: cfg.entries[name].mean() for name in cfg.active})


def prior_moments(cfg: PriorConfig) -> pd.DataFrame:
    """Hyperparameter table with the implied prior mean and standard deviation."""
    rows = []
    for name in cfg.active:
        entry = cfg.entries[name]
        rows.append({
            "Param": name,
            "Family": entry.family.value,
            "a": entry.a,
            "b": entry.b,
            "Mean": entry.mean(),
            "Std. Dev.": entry.std(),
        })
    return pd.DataFrame(rows, columns=["Param", "Family", "a", "b", "Mean", "Std. Dev."])

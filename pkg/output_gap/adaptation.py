"""
Robbins-Monro adaptation of independence proposals.

Each proposal is moved along the gradient of its own log density evaluated at
the latest chain draw, so its parameters drift towards the member of the family
closest (in Kullback-Leibler sense) to the block's posterior. Step sizes
shrink as 1/(C i^d), which gives diminishing adaptation.
"""
from dataclasses import dataclass, replace

import numpy as np
from scipy.special import digamma, polygamma

from config import settings
from output_gap.errors import DomainError
from output_gap.priors import PriorEntry, PriorFamily


def step_size(
    i: int,
    C: float = settings.adaptation_constant,
    exponent: float = settings.adaptation_exponent,
) -> float:
    """delta_i = 1 / (C i^exponent)."""
    if i < 1:
        raise DomainError(f"iteration index must be >= 1, got {i}")
    if C <= 0:
        raise DomainError(f"adaptation constant must be positive, got {C}")
    return 1.0 / (C * float(i) ** exponent)


@dataclass(frozen=True)
class AdaptiveProposal:
    """
    Independence proposal for one MH block.

    Parameters follow ``PriorEntry``: (mean, variance) for Gaussian, shapes for
    Beta on (0, scale), (shape, scale) for InverseGamma.
    """

    family: PriorFamily
    a: float
    b: float
    scale: float = 1.0
    iteration: int = 0
    floor: float = settings.projection_floor

    @classmethod
    def from_prior(cls, entry: PriorEntry, floor: float = settings.projection_floor) -> "AdaptiveProposal":
        return cls(family=entry.family, a=entry.a, b=entry.b, scale=entry.scale, floor=floor)

    @property
    def entry(self) -> PriorEntry:
        return PriorEntry(self.family, self.a, self.b, self.scale)

    def sample(self, rng: np.random.Generator) -> float:
        return float(self.entry.sample(rng))

    def logpdf(self, x: float) -> float:
        return self.entry.logpdf(x)

    def adapt(self, draw: float, delta: float) -> "AdaptiveProposal":
        """Dispatch to the family's recursion."""
        if self.family is PriorFamily.GAUSSIAN:
            return adapt_gaussian(self, draw, delta)
        if self.family is PriorFamily.INVERSE_GAMMA:
            return adapt_invgamma(self, draw, delta)
        return adapt_beta(self, draw, delta)

    def to_dict(self) -> dict:
        return {
            "family": self.family.value,
            "a": self.a,
            "b": self.b,
            "scale": self.scale,
            "iteration": self.iteration,
        }


def adapt_gaussian(prop: AdaptiveProposal, draw: float, delta: float) -> AdaptiveProposal:
    """mu <- mu + delta (x - mu); s2 <- s2 + delta ((x - mu_new)^2 - s2)."""
    mu = prop.a + delta * (draw - prop.a)
    var = prop.b + delta * ((draw - mu) ** 2 - prop.b)
    return replace(prop, a=mu, b=max(var, prop.floor), iteration=prop.iteration + 1)


def _capped(value: float, step: float, max_relative_step: float) -> float:
    limit = max_relative_step * value
    return value + float(np.clip(step, -limit, limit))


def adapt_invgamma(
    prop: AdaptiveProposal,
    draw: float,
    delta: float,
    max_relative_step: float = settings.max_relative_step,
) -> AdaptiveProposal:
    """
    Score step for IG(a, b): d/da = log(b/x) - digamma(a), d/db = a/b - 1/x.

    Each score is divided by its Fisher information (trigamma(a) for a, a/b^2
    for b); the zero of the mean field is unchanged. One update moves a or b
    by at most ``max_relative_step`` times its current value.
    """
    if draw <= 0:
        raise DomainError(f"Inverse-Gamma adaptation needs a positive draw, got {draw}")
    score_a = np.log(prop.b / draw) - digamma(prop.a)
    score_b = prop.a / prop.b - 1.0 / draw
    a = _capped(prop.a, delta * score_a / polygamma(1, prop.a), max_relative_step)
    b = _capped(prop.b, delta * score_b * prop.b ** 2 / prop.a, max_relative_step)
    return replace(
        prop,
        a=max(a, prop.floor),
        b=max(b, prop.floor),
        iteration=prop.iteration + 1,
    )


def adapt_beta(prop: AdaptiveProposal, draw: float, delta: float) -> AdaptiveProposal:
    """
    Score step for Beta(a, b) on (0, scale).

    The draw is mapped to (0, 1) first; the b-step uses the freshly updated a.
    """
    u = draw / prop.scale
    if not 0.0 < u < 1.0:
        raise DomainError(f"Beta adaptation needs a draw inside (0, {prop.scale:.6g}), got {draw}")
    a = prop.a + delta * (np.log(u) + digamma(prop.a + prop.b) - digamma(prop.a))
    a = max(float(a), prop.floor)
    b = prop.b + delta * (np.log1p(-u) + digamma(a + prop.b) - digamma(prop.b))
    return replace(prop, a=a, b=max(float(b), prop.floor), iteration=prop.iteration + 1)

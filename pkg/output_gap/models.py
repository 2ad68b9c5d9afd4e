"""
Output-gap model specifications.

Eight unobserved-components models: a univariate or bivariate (output plus
inflation) measurement block crossed with four trend types. States are kept in
the canonical order (mu, beta, psi, psi_lag, tau); specifications without a
slope or without core inflation simply drop the corresponding entries.
"""
import logging
from dataclasses import dataclass, fields, replace
from enum import Enum
from typing import Dict, Iterable, Optional, Sequence, Tuple

import numpy as np

from config import settings
from output_gap.errors import DomainError, StructuralError
from output_gap.statespace import StateSpaceModel, simulate_state_space

logger = logging.getLogger(__name__)


class Variate(str, Enum):
    """Measurement block."""
    UNIVARIATE = "uni"
    BIVARIATE = "biv"


class TrendType(str, Enum):
    """Trend specification for potential output."""
    LL = "ll"  # local level
    LLD = "lld"  # local level with drift
    LT = "lt"  # local linear trend
    IRW = "irw"  # integrated random walk


CANONICAL_STATES = ("mu", "beta", "psi", "psi_lag", "tau")

PARAMETER_NAMES = (
    "sigma2_eps",
    "sigma2_eta",
    "sigma2_zeta",
    "sigma2_kappa",
    "rho",
    "lam",
    "sigma2_vareps",
    "sigma2_xi",
    "theta0",
    "theta1",
    "drift",
)

VARIANCE_PARAMETERS = frozenset(
    name for name in PARAMETER_NAMES if name.startswith("sigma2_")
)


@dataclass(frozen=True)
class ModelSpec:
    """One of the eight (variate, trend) combinations."""

    variate: Variate
    trend: TrendType

    def __post_init__(self):
        object.__setattr__(self, "variate", Variate(self.variate))
        object.__setattr__(self, "trend", TrendType(self.trend))

    @classmethod
    def from_label(cls, label: str) -> "ModelSpec":
        """Parse labels such as ``uni-lt`` or ``biv-irw``."""
        try:
            variate, trend = label.strip().lower().split("-", 1)
            return cls(Variate(variate), TrendType(trend))
        except ValueError:
            valid = ", ".join(spec.label for spec in all_specs())
            raise StructuralError(f"Unknown model specification '{label}' (valid: {valid})")

    @property
    def label(self) -> str:
        return f"{self.variate.value}-{self.trend.value}"

    @property
    def is_bivariate(self) -> bool:
        return self.variate is Variate.BIVARIATE

    @property
    def has_slope(self) -> bool:
        return self.trend in (TrendType.LT, TrendType.IRW)

    @property
    def state_names(self) -> Tuple[str, ...]:
        names = ["mu"]
        if self.has_slope:
            names.append("beta")
        names += ["psi", "psi_lag"]
        if self.is_bivariate:
            names.append("tau")
        return tuple(names)

    @property
    def observation_names(self) -> Tuple[str, ...]:
        return ("gdp", "inflation") if self.is_bivariate else ("gdp",)

    @property
    def p(self) -> int:
        return len(self.state_names)

    @property
    def d(self) -> int:
        return len(self.observation_names)

    def state_index(self, name: str) -> int:
        try:
            return self.state_names.index(name)
        except ValueError:
            raise StructuralError(f"State '{name}' is not part of {self.label}")

    @property
    def active_parameters(self) -> Tuple[str, ...]:
        """Parameter names estimated under this specification, in canonical order."""
        active = {"sigma2_eps", "sigma2_kappa", "rho", "lam"}
        if self.trend in (TrendType.LL, TrendType.LLD, TrendType.LT):
            active.add("sigma2_eta")
        if self.has_slope:
            active.add("sigma2_zeta")
        if self.trend is TrendType.LLD:
            active.add("drift")
        if self.is_bivariate:
            active |= {"sigma2_vareps", "sigma2_xi", "theta0", "theta1"}
        return tuple(name for name in PARAMETER_NAMES if name in active)

    def __str__(self) -> str:
        return self.label


def all_specs() -> Tuple[ModelSpec, ...]:
    return tuple(ModelSpec(v, t) for v in Variate for t in TrendType)


@dataclass(frozen=True)
class ParameterVector:
    """Model hyperparameters; entries inactive under a spec stay at zero."""

    sigma2_eps: float = 0.0
    sigma2_eta: float = 0.0
    sigma2_zeta: float = 0.0
    sigma2_kappa: float = 0.0
    rho: float = 0.0
    lam: float = 0.0
    sigma2_vareps: float = 0.0
    sigma2_xi: float = 0.0
    theta0: float = 0.0
    theta1: float = 0.0
    drift: float = 0.0

    def to_dict(self) -> Dict[str, float]:
        return {f.name: float(getattr(self, f.name)) for f in fields(self)}

    @classmethod
    def from_dict(cls, data: Dict[str, float]) -> "ParameterVector":
        unknown = set(data) - set(PARAMETER_NAMES)
        if unknown:
            raise StructuralError(f"Unknown parameters: {', '.join(sorted(unknown))}")
        return cls(**{k: float(v) for k, v in data.items()})

    def replace(self, **changes) -> "ParameterVector":
        return replace(self, **changes)

    def as_array(self, names: Sequence[str]) -> np.ndarray:
        return np.array([getattr(self, name) for name in names], dtype=float)

    @classmethod
    def from_array(cls, names: Sequence[str], values: Iterable[float]) -> "ParameterVector":
        return cls(**{name: float(v) for name, v in zip(names, values)})


def validate_parameters(
    spec: ModelSpec,
    params: ParameterVector,
    lam_upper: float = np.pi,
    strict: bool = True,
) -> None:
    """
    Check a parameter vector against a specification.

    With ``strict=False`` zero variances and rho = 0 are accepted, which the
    simulator needs for degenerate test paths.
    """
    active = set(spec.active_parameters)
    values = params.to_dict()
    for name, value in values.items():
        if not np.isfinite(value):
            raise DomainError(f"{name} must be finite, got {value}")
        if name not in active and value != 0.0:
            raise StructuralError(f"{name} is inactive under {spec.label} but set to {value}")

    for name in active & VARIANCE_PARAMETERS:
        value = values[name]
        if value < 0 or (strict and value == 0):
            raise DomainError(f"{name} must be positive, got {value}")

    rho_ok = 0.0 < params.rho < 1.0 if strict else 0.0 <= params.rho < 1.0
    if not rho_ok:
        raise DomainError(f"rho must lie in (0, 1), got {params.rho}")
    if not 0.0 < params.lam < lam_upper:
        raise DomainError(f"lam must lie in (0, {lam_upper:.6g}), got {params.lam}")


def cycle_coefficients(rho: float, lam: float, lam_upper: float = np.pi) -> Tuple[float, float]:
    """AR(2) coefficients (phi1, phi2) = (2 rho cos lam, -rho^2) of the stochastic cycle."""
    if not 0.0 <= rho < 1.0:
        raise DomainError(f"rho must lie in [0, 1), got {rho}")
    if not 0.0 < lam < lam_upper:
        raise DomainError(f"lam must lie in (0, {lam_upper:.6g}), got {lam}")
    return 2.0 * rho * np.cos(lam), -rho * rho


def cycle_parameters(phi1: float, phi2: float) -> Tuple[float, float]:
    """Inverse of ``cycle_coefficients`` for complex-root AR(2) polynomials."""
    if not -1.0 < phi2 < 0.0:
        raise DomainError(f"phi2 must lie in (-1, 0), got {phi2}")
    rho = np.sqrt(-phi2)
    ratio = phi1 / (2.0 * rho)
    if abs(ratio) >= 1.0:
        raise DomainError(f"(phi1={phi1}, phi2={phi2}) has real roots, no cycle frequency")
    return float(rho), float(np.arccos(ratio))


def cycle_period(lam: float) -> float:
    """Period of the cycle in quarters."""
    if lam <= 0:
        raise DomainError(f"lam must be positive, got {lam}")
    return 2.0 * np.pi / lam


@dataclass(frozen=True)
class DerivedEffects:
    """How the output gap feeds core inflation."""

    level_effect: float  # theta0 (phi1 + phi2) + theta1
    change_effect: float  # theta0 phi2
    gap_loading: float  # coefficient on psi_t, theta0 phi1 + theta1
    lagged_gap_loading: float  # coefficient on psi_t-1, theta0 phi2

    @classmethod
    def from_parameters(cls, params: ParameterVector, lam_upper: float = np.pi) -> "DerivedEffects":
        phi1, phi2 = cycle_coefficients(params.rho, params.lam, lam_upper)
        gap_loading = params.theta0 * phi1 + params.theta1
        lagged = params.theta0 * phi2
        return cls(
            level_effect=params.theta0 * (phi1 + phi2) + params.theta1,
            change_effect=lagged,
            gap_loading=gap_loading,
            lagged_gap_loading=lagged,
        )

    def to_dict(self) -> Dict[str, float]:
        return {f.name: float(getattr(self, f.name)) for f in fields(self)}


def build_model(
    spec: ModelSpec,
    params: ParameterVector,
    kappa_init: float = settings.kappa_init,
    lam_upper: float = np.pi,
    a_init: Optional[np.ndarray] = None,
    P_init: Optional[np.ndarray] = None,
    strict: bool = True,
) -> StateSpaceModel:
    """
    Cast a specification and its parameters into state-space form.

    Core inflation follows tau_t+1 = tau_t + theta0 psi_t+1 + theta1 psi_t + xi,
    so after substituting the cycle recursion the tau row loads
    (theta0 phi1 + theta1) on psi_t and theta0 phi2 on psi_t-1, and its
    disturbance theta0 kappa + xi is correlated with the cycle shock.
    """
    validate_parameters(spec, params, lam_upper=lam_upper, strict=strict)
    phi1, phi2 = cycle_coefficients(params.rho, params.lam, lam_upper)
    idx = {name: i for i, name in enumerate(spec.state_names)}
    p, d = spec.p, spec.d

    Z = np.zeros((d, p))
    Z[0, idx["mu"]] = 1.0
    Z[0, idx["psi"]] = 1.0

    T_mat = np.zeros((p, p))
    T_mat[idx["mu"], idx["mu"]] = 1.0
    T_mat[idx["psi"], idx["psi"]] = phi1
    T_mat[idx["psi"], idx["psi_lag"]] = phi2
    T_mat[idx["psi_lag"], idx["psi"]] = 1.0

    Omega = np.zeros((p, p))
    Omega[idx["mu"], idx["mu"]] = params.sigma2_eta
    Omega[idx["psi"], idx["psi"]] = params.sigma2_kappa

    d_state = np.zeros(p)
    if spec.trend is TrendType.LLD:
        d_state[idx["mu"]] = params.drift
    if spec.has_slope:
        T_mat[idx["mu"], idx["beta"]] = 1.0
        T_mat[idx["beta"], idx["beta"]] = 1.0
        Omega[idx["beta"], idx["beta"]] = params.sigma2_zeta

    Sigma = np.zeros((d, d))
    Sigma[0, 0] = params.sigma2_eps
    if spec.is_bivariate:
        tau = idx["tau"]
        Z[1, tau] = 1.0
        Sigma[1, 1] = params.sigma2_vareps
        T_mat[tau, tau] = 1.0
        T_mat[tau, idx["psi"]] = params.theta0 * phi1 + params.theta1
        T_mat[tau, idx["psi_lag"]] = params.theta0 * phi2
        Omega[idx["psi"], tau] = Omega[tau, idx["psi"]] = params.theta0 * params.sigma2_kappa
        Omega[tau, tau] = params.sigma2_xi + params.theta0 ** 2 * params.sigma2_kappa

    return StateSpaceModel(
        c=np.zeros(d),
        d_state=d_state,
        Z=Z,
        T_mat=T_mat,
        Sigma=Sigma,
        Omega=Omega,
        kappa_init=kappa_init,
        a_init=a_init,
        P_init=P_init,
        state_names=spec.state_names,
    )


def simulate_data(
    spec: ModelSpec,
    params: ParameterVector,
    n: int,
    rng: np.random.Generator,
    kappa0: float = settings.simulation_kappa,
    initial_state: Optional[np.ndarray] = None,
    lam_upper: float = np.pi,
) -> Tuple[np.ndarray, np.ndarray]:
    """
    Draw observations and true states from the generative model.

    The initial state is N(initial_state, kappa0 * I); kappa0 = 0 starts the
    path exactly at ``initial_state`` (zero by default).

    Returns:
        (y, states) with shapes (n, d) and (n, p)
    """
    if n < 8:
        raise StructuralError(f"simulation length must be at least 8, got {n}")
    if kappa0 < 0 or not np.isfinite(kappa0):
        raise DomainError(f"kappa0 must be non-negative and finite, got {kappa0}")
    model = build_model(
        spec,
        params,
        lam_upper=lam_upper,
        a_init=initial_state,
        P_init=kappa0 * np.eye(spec.p),
        strict=False,
    )
    y, states = simulate_state_space(model, n, rng)
    logger.debug(f"Simulated {n} periods from {spec.label}")
    return y[:, :, 0], states[:, :, 0]

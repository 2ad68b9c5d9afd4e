"""
Adaptive independence Metropolis-Hastings within Gibbs.

Per iteration:
    1-4   conjugate Inverse-Gamma draws of the measurement, level and slope
          variances (plus a conjugate Gaussian draw of the LLD drift)
    5-10  adaptive independence MH for theta1, theta0, sigma2_xi, rho, lam,
          sigma2_kappa, each followed by a Robbins-Monro proposal update
    11    a fresh latent-state path from the simulation smoother
"""
import logging
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd
from scipy import stats

from config import settings
from output_gap.adaptation import AdaptiveProposal, step_size
from output_gap.errors import NumericalError, OutputGapError, SamplerError, StructuralError
from output_gap.models import (
    ModelSpec,
    ParameterVector,
    TrendType,
    build_model,
    cycle_coefficients,
    validate_parameters,
)
from output_gap.priors import (
    PriorConfig,
    PriorFamily,
    log_prior_density,
    prior_mean_vector,
    sample_prior,
)
from output_gap.statespace import simulation_smoother

logger = logging.getLogger(__name__)

GIBBS_VARIANCE_BLOCKS = ("sigma2_eps", "sigma2_vareps", "sigma2_eta", "sigma2_zeta")
AIMH_BLOCKS = ("theta1", "theta0", "sigma2_xi", "rho", "lam", "sigma2_kappa")
# Blocks whose default target uses only the core-inflation path.
TAU_PATH_BLOCKS = frozenset({"theta1", "sigma2_xi"})
MAX_SEED = 2 ** 64


@dataclass(frozen=True)
class ChainSettings:
    """Run controls for one chain."""

    n_iter: int
    burn_in: int = 0
    thin: int = 1
    seed: Optional[int] = settings.default_seed
    C: float = settings.adaptation_constant
    exponent: float = settings.adaptation_exponent
    init: str = "prior_mean"  # or "prior_draw"
    proposal_init: str = "conditional"  # or "prior"
    proposal_spread: float = settings.proposal_spread
    initial_parameters: Optional[ParameterVector] = None
    fixed_parameters: Dict[str, float] = field(default_factory=dict)
    exact_tau_conditional: bool = False
    freeze_adaptation: bool = False
    store_states: bool = False
    kappa_init: float = settings.kappa_init
    log_every: int = settings.log_every

    def __post_init__(self):
        if self.n_iter < 0 or self.burn_in < 0:
            raise StructuralError("n_iter and burn_in must be non-negative")
        if self.burn_in > self.n_iter:
            raise StructuralError(f"burn_in ({self.burn_in}) exceeds n_iter ({self.n_iter})")
        if self.thin < 1:
            raise StructuralError(f"thin must be >= 1, got {self.thin}")
        if (self.n_iter - self.burn_in) % self.thin:
            raise StructuralError(
                f"n_iter - burn_in ({self.n_iter - self.burn_in}) is not a multiple of thin ({self.thin})"
            )
        if self.seed is not None and not 0 <= self.seed < MAX_SEED:
            raise StructuralError(f"seed must be an unsigned 64-bit integer, got {self.seed}")
        if self.init not in ("prior_mean", "prior_draw"):
            raise StructuralError(f"Unknown initialization '{self.init}'")
        if self.proposal_init not in ("conditional", "prior"):
            raise StructuralError(f"Unknown proposal initialization '{self.proposal_init}'")
        if self.proposal_spread < 1.0:
            raise StructuralError(f"proposal_spread must be >= 1, got {self.proposal_spread}")

    @property
    def n_keep(self) -> int:
        return (self.n_iter - self.burn_in) // self.thin

    def keeps(self, i: int) -> bool:
        """Whether 1-based iteration i is stored."""
        return i > self.burn_in and (i - self.burn_in) % self.thin == 0

    def to_dict(self) -> Dict:
        return {
            "n_iter": self.n_iter,
            "burn_in": self.burn_in,
            "thin": self.thin,
            "seed": self.seed,
            "C": self.C,
            "exponent": self.exponent,
            "init": self.init,
            "proposal_init": self.proposal_init,
            "proposal_spread": self.proposal_spread,
            "fixed_parameters": dict(self.fixed_parameters),
            "exact_tau_conditional": self.exact_tau_conditional,
            "freeze_adaptation": self.freeze_adaptation,
            "kappa_init": self.kappa_init,
        }


@dataclass
class ChainState:
    """Everything that changes from one iteration to the next."""

    params: ParameterVector
    states: np.ndarray  # (T, p)
    proposals: Dict[str, AdaptiveProposal]
    rng: np.random.Generator
    iteration: int = 0
    accepted: Dict[str, int] = field(default_factory=dict)
    attempted: Dict[str, int] = field(default_factory=dict)

    def acceptance_rates(self) -> Dict[str, float]:
        return {
            block: self.accepted.get(block, 0) / n
            for block, n in self.attempted.items()
            if n > 0
        }


@dataclass
class PosteriorDraws:
    """Kept draws of one chain (or several merged chains)."""

    spec_label: str
    names: Tuple[str, ...]
    draws: np.ndarray  # (n_keep, n_params)
    log_posterior: np.ndarray  # (n_keep,)
    acceptance_rates: Dict[str, float]
    metadata: Dict
    trend_paths: np.ndarray  # (n_keep, T)
    cycle_paths: np.ndarray  # (n_keep, T)
    core_inflation_paths: Optional[np.ndarray] = None
    state_paths: Optional[np.ndarray] = None  # (n_keep, T, p)
    final_proposals: Dict[str, Dict] = field(default_factory=dict)

    @property
    def n_keep(self) -> int:
        return self.draws.shape[0]

    @property
    def spec(self) -> ModelSpec:
        return ModelSpec.from_label(self.spec_label)

    def column(self, name: str) -> np.ndarray:
        try:
            return self.draws[:, self.names.index(name)]
        except ValueError:
            raise StructuralError(f"No draws for parameter '{name}'")

    def parameter_vector(self, k: int) -> ParameterVector:
        return ParameterVector.from_array(self.names, self.draws[k])

    def to_frame(self) -> pd.DataFrame:
        frame = pd.DataFrame(self.draws, columns=list(self.names))
        frame["log_posterior"] = self.log_posterior
        return frame


def conjugate_posterior(a: float, b: float, n: int, ss: float) -> Tuple[float, float]:
    """Inverse-Gamma update (a + n/2, b + ss/2)."""
    if not np.isfinite(ss):
        raise NumericalError(f"sum of squares is not finite: {ss}")
    return a + 0.5 * n, b + 0.5 * ss


def _state(spec: ModelSpec, states: np.ndarray, name: str) -> np.ndarray:
    return states[:, spec.state_index(name)]


def variance_residuals(
    block: str, spec: ModelSpec, states: np.ndarray, y: np.ndarray, params: ParameterVector
) -> np.ndarray:
    """Disturbances whose variance is ``block``, given a state path."""
    if block == "sigma2_eps":
        return y[:, 0] - _state(spec, states, "mu") - _state(spec, states, "psi")
    if block == "sigma2_vareps":
        return y[:, 1] - _state(spec, states, "tau")
    if block == "sigma2_eta":
        mu = _state(spec, states, "mu")
        resid = np.diff(mu)
        if spec.has_slope:
            resid = resid - _state(spec, states, "beta")[:-1]
        elif spec.trend is TrendType.LLD:
            resid = resid - params.drift
        return resid
    if block == "sigma2_zeta":
        return np.diff(_state(spec, states, "beta"))
    raise StructuralError(f"'{block}' is not a conjugate variance block")


def gibbs_variance_step(
    block: str,
    spec: ModelSpec,
    states: np.ndarray,
    y: np.ndarray,
    params: ParameterVector,
    prior: PriorConfig,
    rng: np.random.Generator,
) -> float:
    """Exact draw from the Inverse-Gamma full conditional of a variance block."""
    entry = prior.entry(block)
    if entry.family is not PriorFamily.INVERSE_GAMMA:
        raise StructuralError(f"{block} needs an Inverse-Gamma prior for the conjugate step")
    resid = variance_residuals(block, spec, states, y, params)
    ss = float(np.dot(resid, resid))
    a_post, b_post = conjugate_posterior(entry.a, entry.b, resid.size, ss)
    return float(stats.invgamma.rvs(a_post, scale=b_post, random_state=rng))


def gibbs_drift_step(
    spec: ModelSpec,
    states: np.ndarray,
    params: ParameterVector,
    prior: PriorConfig,
    rng: np.random.Generator,
) -> float:
    """Conjugate Gaussian draw of the LLD drift given the trend path and sigma2_eta."""
    entry = prior.entry("drift")
    increments = np.diff(_state(spec, states, "mu"))
    precision = 1.0 / entry.b + increments.size / params.sigma2_eta
    mean = (entry.a / entry.b + increments.sum() / params.sigma2_eta) / precision
    return float(rng.normal(mean, np.sqrt(1.0 / precision)))


def cycle_innovations(
    spec: ModelSpec, states: np.ndarray, params: ParameterVector, lam_upper: float
) -> Tuple[np.ndarray, Optional[np.ndarray]]:
    """
    Cycle shocks and core-inflation shocks implied by a state path.

    Returns (e_psi, e_tau) where e_tau = theta0 kappa + xi, or None for
    univariate specs.
    """
    phi1, phi2 = cycle_coefficients(params.rho, params.lam, lam_upper)
    psi = _state(spec, states, "psi")
    psi_lag = _state(spec, states, "psi_lag")
    e_psi = psi[1:] - phi1 * psi[:-1] - phi2 * psi_lag[:-1]
    if not spec.is_bivariate:
        return e_psi, None
    tau = _state(spec, states, "tau")
    e_tau = (
        np.diff(tau)
        - (params.theta0 * phi1 + params.theta1) * psi[:-1]
        - params.theta0 * phi2 * psi_lag[:-1]
    )
    return e_psi, e_tau


def cycle_log_density(
    spec: ModelSpec, states: np.ndarray, params: ParameterVector, lam_upper: float
) -> float:
    """Joint log density of the cycle (and core-inflation) transitions."""
    e_psi, e_tau = cycle_innovations(spec, states, params, lam_upper)
    total = stats.norm.logpdf(e_psi, scale=np.sqrt(params.sigma2_kappa)).sum()
    if e_tau is not None:
        total += stats.norm.logpdf(e_tau - params.theta0 * e_psi, scale=np.sqrt(params.sigma2_xi)).sum()
    return float(total)


def tau_path_log_density(
    spec: ModelSpec, states: np.ndarray, params: ParameterVector, lam_upper: float
) -> float:
    """Core-inflation transitions alone, shock variance sigma2_xi + theta0^2 sigma2_kappa."""
    _, e_tau = cycle_innovations(spec, states, params, lam_upper)
    if e_tau is None:
        raise StructuralError(f"{spec.label} has no core-inflation path")
    variance = params.sigma2_xi + params.theta0 ** 2 * params.sigma2_kappa
    return float(stats.norm.logpdf(e_tau, scale=np.sqrt(variance)).sum())


def block_log_target(
    block: str,
    value: float,
    chain: ChainState,
    spec: ModelSpec,
    prior: PriorConfig,
    exact_tau_conditional: bool = False,
) -> float:
    """Log conditional density (up to a constant) of one MH block at ``value``."""
    log_prior = prior.entry(block).logpdf(value)
    if log_prior == -np.inf:
        return -np.inf
    params = chain.params.replace(**{block: value})
    if block in TAU_PATH_BLOCKS and not exact_tau_conditional:
        log_lik = tau_path_log_density(spec, chain.states, params, prior.lam_upper)
    else:
        log_lik = cycle_log_density(spec, chain.states, params, prior.lam_upper)
    return log_lik + log_prior


def acceptance_probability(
    log_target_candidate: float,
    log_target_current: float,
    log_proposal_candidate: float,
    log_proposal_current: float,
) -> float:
    """min(1, pi(x*) q(x) / (pi(x) q(x*))) for an independence proposal."""
    if log_target_candidate == -np.inf or np.isnan(log_target_candidate):
        return 0.0
    log_ratio = (log_target_candidate - log_target_current) + (
        log_proposal_current - log_proposal_candidate
    )
    if np.isnan(log_ratio):
        return 0.0
    return float(np.exp(min(0.0, log_ratio)))


def aimh_step(
    block: str,
    rng: np.random.Generator,
    chain: ChainState,
    spec: ModelSpec,
    prior: PriorConfig,
    exact_tau_conditional: bool = False,
) -> Tuple[float, bool]:
    """One independence MH update of ``block``; returns (new value, accepted)."""
    proposal = chain.proposals[block]
    current = getattr(chain.params, block)
    candidate = proposal.sample(rng)

    target_candidate = block_log_target(block, candidate, chain, spec, prior, exact_tau_conditional)
    target_current = block_log_target(block, current, chain, spec, prior, exact_tau_conditional)
    prob = acceptance_probability(
        target_candidate, target_current, proposal.logpdf(candidate), proposal.logpdf(current)
    )
    if rng.uniform() < prob:
        return candidate, True
    return current, False


def _widened_invgamma(a: float, b: float, spread: float) -> AdaptiveProposal:
    """IG with the same mean and ``spread`` times the variance."""
    if a <= 2.0 or spread == 1.0:
        return AdaptiveProposal(PriorFamily.INVERSE_GAMMA, a, b)
    mean = b / (a - 1.0)
    a_wide = 2.0 + (a - 2.0) / spread
    return AdaptiveProposal(PriorFamily.INVERSE_GAMMA, a_wide, mean * (a_wide - 1.0))


def conditional_proposal(
    block: str,
    spec: ModelSpec,
    states: np.ndarray,
    params: ParameterVector,
    prior: PriorConfig,
    exact_tau_conditional: bool = False,
    spread: float = settings.proposal_spread,
) -> Optional[AdaptiveProposal]:
    """
    Starting proposal from the block's conditional moments given one state path.

    theta1, theta0 and sigma2_kappa get their exact conjugate conditionals;
    sigma2_xi gets the conjugate form of the joint target (exact when
    ``exact_tau_conditional``). Variances are multiplied by ``spread``.
    Returns None for rho and lam, or when the prior family is not conjugate.
    """
    entry = prior.entry(block)
    if block in ("sigma2_kappa", "sigma2_xi"):
        if entry.family is not PriorFamily.INVERSE_GAMMA:
            return None
        e_psi, e_tau = cycle_innovations(spec, states, params, prior.lam_upper)
        resid = e_psi if block == "sigma2_kappa" else e_tau - params.theta0 * e_psi
        a_post, b_post = conjugate_posterior(entry.a, entry.b, resid.size, float(resid @ resid))
        return _widened_invgamma(a_post, b_post, spread)

    if block not in ("theta0", "theta1") or entry.family is not PriorFamily.GAUSSIAN:
        return None
    psi = _state(spec, states, "psi")
    dtau = np.diff(_state(spec, states, "tau"))
    if block == "theta0":
        regressor = psi[1:]
        response = dtau - params.theta1 * psi[:-1]
        variance = params.sigma2_xi
    elif exact_tau_conditional:
        regressor = psi[:-1]
        response = dtau - params.theta0 * psi[1:]
        variance = params.sigma2_xi
    else:
        phi1, phi2 = cycle_coefficients(params.rho, params.lam, prior.lam_upper)
        psi_lag = _state(spec, states, "psi_lag")
        regressor = psi[:-1]
        response = dtau - params.theta0 * (phi1 * psi[:-1] + phi2 * psi_lag[:-1])
        variance = params.sigma2_xi + params.theta0 ** 2 * params.sigma2_kappa
    precision = 1.0 / entry.b + float(regressor @ regressor) / variance
    mean = (entry.a / entry.b + float(regressor @ response) / variance) / precision
    return AdaptiveProposal(PriorFamily.GAUSSIAN, mean, spread / precision)


def starting_proposals(
    blocks: Sequence[str],
    spec: ModelSpec,
    states: np.ndarray,
    params: ParameterVector,
    prior: PriorConfig,
    chain_settings: ChainSettings,
) -> Dict[str, AdaptiveProposal]:
    """One proposal per MH block, from the prior or from conditional moments."""
    proposals = {}
    for block in blocks:
        proposal = None
        if chain_settings.proposal_init == "conditional":
            proposal = conditional_proposal(
                block, spec, states, params, prior,
                chain_settings.exact_tau_conditional, chain_settings.proposal_spread,
            )
        proposals[block] = proposal or AdaptiveProposal.from_prior(prior.entry(block))
        logger.debug(f"Starting proposal for {block}: {proposals[block].to_dict()}")
    return proposals


def log_joint_posterior(
    spec: ModelSpec,
    prior: PriorConfig,
    y: np.ndarray,
    params: ParameterVector,
    states: np.ndarray,
    kappa_init: float = settings.kappa_init,
) -> float:
    """Complete-data log likelihood of (y, states) plus the log prior."""
    log_prior = log_prior_density(params, prior)
    if log_prior == -np.inf:
        return -np.inf
    model = build_model(spec, params, kappa_init=kappa_init, lam_upper=prior.lam_upper)

    fitted = states @ model.Z.T + model.c
    obs_sd = np.sqrt(np.diag(model.Sigma))
    total = stats.norm.logpdf(y, loc=fitted, scale=obs_sd).sum()

    total += stats.multivariate_normal.logpdf(states[0], mean=model.a_init, cov=model.P_init)

    noisy = np.flatnonzero(np.diag(model.Omega) > 0)
    resid = states[1:] - model.d_state - states[:-1] @ model.T_mat.T
    resid = resid[:, noisy]
    cov = model.Omega[np.ix_(noisy, noisy)]
    total += np.sum(stats.multivariate_normal.logpdf(resid, mean=np.zeros(noisy.size), cov=cov))
    return float(total + log_prior)


def _initial_parameters(
    spec: ModelSpec, prior: PriorConfig, chain_settings: ChainSettings, rng: np.random.Generator
) -> ParameterVector:
    if chain_settings.initial_parameters is not None:
        params = chain_settings.initial_parameters
    elif chain_settings.init == "prior_draw":
        params = sample_prior(prior, rng)
    else:
        params = prior_mean_vector(prior)
    if chain_settings.fixed_parameters:
        params = params.replace(**chain_settings.fixed_parameters)
    validate_parameters(spec, params, lam_upper=prior.lam_upper)
    return params


def _draw_states(
    spec: ModelSpec, prior: PriorConfig, y: np.ndarray, params: ParameterVector,
    rng: np.random.Generator, kappa_init: float,
) -> np.ndarray:
    model = build_model(spec, params, kappa_init=kappa_init, lam_upper=prior.lam_upper)
    return simulation_smoother(model, y, rng)


def _as_observations(spec: ModelSpec, y) -> np.ndarray:
    arr = np.asarray(y, dtype=float)
    if arr.ndim == 1:
        arr = arr[:, None]
    if arr.ndim != 2 or arr.shape[1] != spec.d:
        raise StructuralError(f"{spec.label} needs observations of shape (T, {spec.d}), got {np.shape(y)}")
    if arr.shape[0] < 8:
        raise StructuralError(f"need at least 8 observations, got {arr.shape[0]}")
    if not np.all(np.isfinite(arr)):
        raise StructuralError("observations must be finite")
    return arr


def run_chain(
    spec: ModelSpec,
    prior: PriorConfig,
    y,
    chain_settings: ChainSettings,
) -> PosteriorDraws:
    """
    Run one AIMH-within-Gibbs chain.

    Args:
        spec: Model specification
        prior: Prior configuration (restricted to the spec's active blocks here)
        y: Observations, shape (T, d)
        chain_settings: Iterations, burn-in, thinning, seed and options

    Returns:
        PosteriorDraws with the kept draws and their trend/cycle paths
    """
    y = _as_observations(spec, y)
    prior = prior.for_spec(spec)
    active = spec.active_parameters
    fixed = dict(chain_settings.fixed_parameters)
    unknown_fixed = set(fixed) - set(active)
    if unknown_fixed:
        raise StructuralError(f"Cannot fix inactive parameters: {sorted(unknown_fixed)}")

    rng = np.random.default_rng(chain_settings.seed)
    started = time.perf_counter()
    logger.info(
        f"Starting {spec.label} chain: {chain_settings.n_iter} iterations, "
        f"burn-in {chain_settings.burn_in}, thin {chain_settings.thin}, seed {chain_settings.seed}"
    )

    mh_blocks = [b for b in AIMH_BLOCKS if b in active and b not in fixed]
    try:
        params = _initial_parameters(spec, prior, chain_settings, rng)
        states = _draw_states(spec, prior, y, params, rng, chain_settings.kappa_init)
        proposals = starting_proposals(mh_blocks, spec, states, params, prior, chain_settings)
    except OutputGapError as exc:
        raise SamplerError(str(exc), iteration=0, block="initialize") from exc

    chain = ChainState(params=params, states=states, proposals=proposals, rng=rng)
    steps = _iteration_steps(spec, prior, y, chain_settings, mh_blocks, fixed)

    n_keep = chain_settings.n_keep
    names = active
    draws = np.empty((n_keep, len(names)))
    log_post = np.empty(n_keep)
    trend = np.empty((n_keep, y.shape[0]))
    cycle = np.empty((n_keep, y.shape[0]))
    core = np.empty((n_keep, y.shape[0])) if spec.is_bivariate else None
    full_states = np.empty((n_keep, y.shape[0], spec.p)) if chain_settings.store_states else None

    k = 0
    for i in range(1, chain_settings.n_iter + 1):
        chain.iteration = i
        delta = 0.0 if chain_settings.freeze_adaptation else step_size(
            i, chain_settings.C, chain_settings.exponent
        )
        for block, step in steps:
            try:
                step(chain, delta)
            except SamplerError:
                raise
            except Exception as exc:
                logger.error(f"Block {block} failed at iteration {i}: {exc}")
                raise SamplerError(str(exc), iteration=i, block=block) from exc

        if chain_settings.keeps(i):
            draws[k] = chain.params.as_array(names)
            log_post[k] = log_joint_posterior(
                spec, prior, y, chain.params, chain.states, chain_settings.kappa_init
            )
            trend[k] = _state(spec, chain.states, "mu")
            cycle[k] = _state(spec, chain.states, "psi")
            if core is not None:
                core[k] = _state(spec, chain.states, "tau")
            if full_states is not None:
                full_states[k] = chain.states
            k += 1

        if chain_settings.log_every and i % chain_settings.log_every == 0:
            rates = ", ".join(f"{b}={r:.2f}" for b, r in chain.acceptance_rates().items())
            logger.info(f"Iteration {i}/{chain_settings.n_iter} acceptance: {rates}")

    elapsed = time.perf_counter() - started
    logger.info(f"Finished {spec.label} chain in {elapsed:.1f}s, kept {n_keep} draws")

    metadata = chain_settings.to_dict()
    metadata.update({
        "spec": spec.label,
        "n_keep": n_keep,
        "n_obs": int(y.shape[0]),
        "lambda_scale": prior.lambda_scale.value,
        "state_names": list(spec.state_names),
        "wall_time_seconds": elapsed,
    })
    return PosteriorDraws(
        spec_label=spec.label,
        names=tuple(names),
        draws=draws,
        log_posterior=log_post,
        acceptance_rates=chain.acceptance_rates(),
        metadata=metadata,
        trend_paths=trend,
        cycle_paths=cycle,
        core_inflation_paths=core,
        state_paths=full_states,
        final_proposals={b: p.to_dict() for b, p in chain.proposals.items()},
    )


def _iteration_steps(
    spec: ModelSpec,
    prior: PriorConfig,
    y: np.ndarray,
    chain_settings: ChainSettings,
    mh_blocks: Sequence[str],
    fixed: Dict[str, float],
) -> List[Tuple[str, Callable[[ChainState, float], None]]]:
    """Ordered (name, step) pairs executed once per iteration."""
    active = set(spec.active_parameters)
    steps: List[Tuple[str, Callable[[ChainState, float], None]]] = []

    def gibbs(block: str):
        def step(chain: ChainState, delta: float) -> None:
            value = gibbs_variance_step(block, spec, chain.states, y, chain.params, prior, chain.rng)
            chain.params = chain.params.replace(**{block: value})
        return step

    def drift(chain: ChainState, delta: float) -> None:
        value = gibbs_drift_step(spec, chain.states, chain.params, prior, chain.rng)
        chain.params = chain.params.replace(drift=value)

    def metropolis(block: str):
        def step(chain: ChainState, delta: float) -> None:
            value, accepted = aimh_step(
                block, chain.rng, chain, spec, prior, chain_settings.exact_tau_conditional
            )
            chain.params = chain.params.replace(**{block: value})
            chain.attempted[block] = chain.attempted.get(block, 0) + 1
            chain.accepted[block] = chain.accepted.get(block, 0) + int(accepted)
            chain.proposals[block] = chain.proposals[block].adapt(value, delta)
        return step

    def draw_states(chain: ChainState, delta: float) -> None:
        chain.states = _draw_states(
            spec, prior, y, chain.params, chain.rng, chain_settings.kappa_init
        )

    for block in GIBBS_VARIANCE_BLOCKS:
        if block in active and block not in fixed:
            steps.append((block, gibbs(block)))
        if block == "sigma2_zeta" and "drift" in active and "drift" not in fixed:
            steps.append(("drift", drift))
    for block in mh_blocks:
        steps.append((block, metropolis(block)))
    steps.append(("states", draw_states))
    return steps


def _run_chain_task(args) -> PosteriorDraws:
    spec, prior, y, chain_settings = args
    return run_chain(spec, prior, y, chain_settings)


def chain_seeds(seed: Optional[int], n_chains: int) -> List[int]:
    """Independent child seeds derived from one root seed."""
    children = np.random.SeedSequence(seed).spawn(n_chains)
    return [int(child.generate_state(1, dtype=np.uint64)[0]) for child in children]


def run_chains(
    spec: ModelSpec,
    prior: PriorConfig,
    y,
    chain_settings: ChainSettings,
    n_chains: int,
    max_workers: Optional[int] = None,
) -> List[PosteriorDraws]:
    """Run independent seeded chains in a process pool."""
    if n_chains < 1:
        raise StructuralError(f"n_chains must be >= 1, got {n_chains}")
    if n_chains == 1:
        return [run_chain(spec, prior, y, chain_settings)]

    tasks = [
        (spec, prior, np.asarray(y, dtype=float), replace(chain_settings, seed=seed))
        for seed in chain_seeds(chain_settings.seed, n_chains)
    ]
    logger.info(f"Running {n_chains} chains in parallel")
    with ProcessPoolExecutor(max_workers=max_workers) as executor:
        return list(executor.map(_run_chain_task, tasks))


def merge_draws(chains: Sequence[PosteriorDraws]) -> PosteriorDraws:
    """Pool kept draws of chains that share a specification."""
    if not chains:
        raise StructuralError("nothing to merge")
    first = chains[0]
    for other in chains[1:]:
        if other.spec_label != first.spec_label or other.names != first.names:
            raise StructuralError("cannot merge chains of different specifications")

    def stack(attr: str) -> Optional[np.ndarray]:
        parts = [getattr(c, attr) for c in chains]
        if any(p is None for p in parts):
            return None
        return np.concatenate(parts, axis=0)

    blocks = sorted({b for c in chains for b in c.acceptance_rates})
    rates = {
        b: float(np.mean([c.acceptance_rates[b] for c in chains if b in c.acceptance_rates]))
        for b in blocks
    }
    metadata = dict(first.metadata)
    metadata.update({
        "n_chains": len(chains),
        "seeds": [c.metadata.get("seed") for c in chains],
        "n_keep": int(sum(c.n_keep for c in chains)),
    })
    return PosteriorDraws(
        spec_label=first.spec_label,
        names=first.names,
        draws=stack("draws"),
        log_posterior=stack("log_posterior"),
        acceptance_rates=rates,
        metadata=metadata,
        trend_paths=stack("trend_paths"),
        cycle_paths=stack("cycle_paths"),
        core_inflation_paths=stack("core_inflation_paths"),
        state_paths=stack("state_paths"),
    )

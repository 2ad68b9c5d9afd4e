"""
Linear Gaussian state-space machinery.

    y_t       = c + Z alpha_t + eps_t,          eps_t ~ N(0, Sigma)
    alpha_t+1 = d + T alpha_t + eta_t,          eta_t ~ N(0, Omega)
    alpha_1   ~ N(a_init, P_init),              P_init = kappa * I by default

Provides the Kalman filter with the prediction-error log-likelihood, the
backward state smoother and a mean-correction simulation smoother that draws
whole state paths from p(alpha | y). Omega may be singular (companion rows of
the cycle), no jitter is ever added.
"""
import logging
from dataclasses import dataclass, field
from typing import Optional, Tuple

import numpy as np
from scipy import linalg

from config import settings
from output_gap.errors import NumericalError, StructuralError

logger = logging.getLogger(__name__)

LOG_2PI = float(np.log(2.0 * np.pi))
# Innovation covariances below this are treated as carrying no information.
NEGLIGIBLE_VARIANCE = 1e-14


def _as_matrix(value, name: str) -> np.ndarray:
    arr = np.array(value, dtype=float)
    if arr.ndim != 2:
        raise StructuralError(f"{name} must be a matrix, got shape {arr.shape}")
    return arr


def _as_vector(value, name: str) -> np.ndarray:
    arr = np.array(value, dtype=float)
    if arr.ndim != 1:
        raise StructuralError(f"{name} must be a vector, got shape {arr.shape}")
    return arr


def _check_covariance(matrix: np.ndarray, name: str) -> None:
    scale = max(1.0, float(np.max(np.abs(matrix)))) if matrix.size else 1.0
    if not np.all(np.isfinite(matrix)):
        raise StructuralError(f"{name} has non-finite entries")
    if not np.allclose(matrix, matrix.T, rtol=0.0, atol=1e-12 * scale):
        raise StructuralError(f"{name} is not symmetric")
    if matrix.size and np.min(linalg.eigvalsh(matrix)) < -1e-10 * scale:
        raise StructuralError(f"{name} is not positive semi-definite")


def _readonly(arr: np.ndarray) -> np.ndarray:
    arr.setflags(write=False)
    return arr


def _symmetrize(matrix: np.ndarray) -> np.ndarray:
    return 0.5 * (matrix + np.swapaxes(matrix, -1, -2))


def psd_factor(matrix: np.ndarray) -> np.ndarray:
    """Return L with L @ L.T == matrix for a (possibly singular) PSD matrix."""
    if not np.any(matrix):
        return np.zeros_like(matrix)
    eigvals, eigvecs = linalg.eigh(matrix)
    return eigvecs * np.sqrt(np.clip(eigvals, 0.0, None))


@dataclass(frozen=True)
class StateSpaceModel:
    """Immutable system matrices plus the initial-state distribution."""

    c: np.ndarray
    d_state: np.ndarray
    Z: np.ndarray
    T_mat: np.ndarray
    Sigma: np.ndarray
    Omega: np.ndarray
    kappa_init: float = settings.kappa_init
    a_init: Optional[np.ndarray] = None
    P_init: Optional[np.ndarray] = None
    state_names: Tuple[str, ...] = ()

    def __post_init__(self):
        Z = _as_matrix(self.Z, "Z")
        d, p = Z.shape
        c = _as_vector(self.c, "c")
        d_state = _as_vector(self.d_state, "d_state")
        T_mat = _as_matrix(self.T_mat, "T_mat")
        Sigma = _as_matrix(self.Sigma, "Sigma")
        Omega = _as_matrix(self.Omega, "Omega")

        if c.shape != (d,):
            raise StructuralError(f"c has shape {c.shape}, expected ({d},)")
        if d_state.shape != (p,):
            raise StructuralError(f"d_state has shape {d_state.shape}, expected ({p},)")
        if T_mat.shape != (p, p):
            raise StructuralError(f"T_mat has shape {T_mat.shape}, expected ({p}, {p})")
        if Sigma.shape != (d, d):
            raise StructuralError(f"Sigma has shape {Sigma.shape}, expected ({d}, {d})")
        if Omega.shape != (p, p):
            raise StructuralError(f"Omega has shape {Omega.shape}, expected ({p}, {p})")
        for name, arr in (("c", c), ("d_state", d_state), ("Z", Z), ("T_mat", T_mat)):
            if not np.all(np.isfinite(arr)):
                raise StructuralError(f"{name} has non-finite entries")
        _check_covariance(Sigma, "Sigma")
        _check_covariance(Omega, "Omega")

        kappa = float(self.kappa_init)
        if not np.isfinite(kappa) or kappa <= 0:
            raise StructuralError(f"kappa_init must be positive and finite, got {self.kappa_init}")

        a_init = np.zeros(p) if self.a_init is None else _as_vector(self.a_init, "a_init")
        P_init = kappa * np.eye(p) if self.P_init is None else _as_matrix(self.P_init, "P_init")
        if a_init.shape != (p,):
            raise StructuralError(f"a_init has shape {a_init.shape}, expected ({p},)")
        if P_init.shape != (p, p):
            raise StructuralError(f"P_init has shape {P_init.shape}, expected ({p}, {p})")
        _check_covariance(P_init, "P_init")

        names = tuple(self.state_names)
        if names and len(names) != p:
            raise StructuralError(f"{len(names)} state names for {p} states")

        for attr, value in (
            ("c", c), ("d_state", d_state), ("Z", Z), ("T_mat", T_mat),
            ("Sigma", Sigma), ("Omega", Omega), ("a_init", a_init), ("P_init", P_init),
        ):
            object.__setattr__(self, attr, _readonly(value))
        object.__setattr__(self, "kappa_init", kappa)
        object.__setattr__(self, "state_names", names)

    @property
    def p(self) -> int:
        return self.Z.shape[1]

    @property
    def d(self) -> int:
        return self.Z.shape[0]


@dataclass
class FilterOutput:
    """Forward-pass output of the Kalman filter."""

    predicted_means: np.ndarray  # (T, p)
    predicted_covs: np.ndarray  # (T, p, p)
    filtered_means: np.ndarray  # (T, p)
    filtered_covs: np.ndarray  # (T, p, p)
    innovations: np.ndarray  # (T, d)
    innovation_covs: np.ndarray  # (T, d, d)
    innovation_precisions: np.ndarray  # (T, d, d), zero on no-information steps
    kalman_gains: np.ndarray  # (T, p, d), P Z' F^-1
    log_likelihood_terms: np.ndarray  # (T,)
    log_likelihood: float = field(init=False)

    def __post_init__(self):
        self.log_likelihood = float(np.sum(self.log_likelihood_terms))

    @property
    def n_obs(self) -> int:
        return self.innovations.shape[0]

    def diffuse_log_likelihood(self, n_diffuse: int) -> float:
        """Log-likelihood without the first ``n_diffuse`` prediction-error terms."""
        return float(np.sum(self.log_likelihood_terms[n_diffuse:]))


@dataclass
class SmootherOutput:
    """Smoothed state moments E[alpha_t | y_1:T] and Var[alpha_t | y_1:T]."""

    means: np.ndarray  # (T, p)
    covs: np.ndarray  # (T, p, p)


@dataclass
class _CovariancePass:
    """Data-independent part of the filter, shared by every means pass."""

    P_pred: np.ndarray
    P_filt: np.ndarray
    F: np.ndarray
    F_inv: np.ndarray
    gains: np.ndarray
    log_det_F: np.ndarray
    informative: np.ndarray


def _covariance_pass(model: StateSpaceModel, n: int) -> _CovariancePass:
    p, d = model.p, model.d
    Z, T_mat, Sigma, Omega = model.Z, model.T_mat, model.Sigma, model.Omega

    P_pred = np.empty((n, p, p))
    P_filt = np.empty((n, p, p))
    F_all = np.empty((n, d, d))
    F_inv = np.zeros((n, d, d))
    gains = np.zeros((n, p, d))
    log_det_F = np.zeros(n)
    informative = np.ones(n, dtype=bool)

    P = np.array(model.P_init, dtype=float)
    eye_d = np.eye(d)
    for t in range(n):
        P_pred[t] = P
        PZt = P @ Z.T
        F = _symmetrize(Z @ PZt + Sigma)
        F_all[t] = F
        try:
            cho = linalg.cho_factor(F, lower=True, check_finite=False)
        except linalg.LinAlgError:
            if np.max(np.abs(F)) > NEGLIGIBLE_VARIANCE:
                raise NumericalError("innovation covariance is not invertible", time_index=t)
            # Fully determined observation: carries no new information.
            logger.debug(f"Zero innovation variance at t={t}, skipping update")
            informative[t] = False
            P_filt[t] = P
        else:
            log_det_F[t] = 2.0 * np.sum(np.log(np.diag(cho[0])))
            Finv = linalg.cho_solve(cho, eye_d, check_finite=False)
            F_inv[t] = _symmetrize(Finv)
            K = PZt @ F_inv[t]
            gains[t] = K
            P_filt[t] = _symmetrize(P - K @ PZt.T)
        P = _symmetrize(T_mat @ P_filt[t] @ T_mat.T + Omega)

    return _CovariancePass(P_pred, P_filt, F_all, F_inv, gains, log_det_F, informative)


def _means_pass(
    model: StateSpaceModel, cov: _CovariancePass, y: np.ndarray, homogeneous: bool = False
) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Filtered means for a batch of data sets; y has shape (T, d, k)."""
    n, _, k = y.shape
    p = model.p
    Z, T_mat = model.Z, model.T_mat
    c = np.zeros((model.d, 1)) if homogeneous else model.c[:, None]
    d_state = np.zeros((p, 1)) if homogeneous else model.d_state[:, None]
    a = np.zeros((p, k)) if homogeneous else np.repeat(model.a_init[:, None], k, axis=1)

    a_pred = np.empty((n, p, k))
    a_filt = np.empty((n, p, k))
    v_all = np.empty_like(y)
    for t in range(n):
        a_pred[t] = a
        v = y[t] - c - Z @ a
        v_all[t] = v
        a_filt[t] = a + cov.gains[t] @ v
        a = d_state + T_mat @ a_filt[t]
    return a_pred, a_filt, v_all


def _backward_means(
    model: StateSpaceModel,
    a_filt: np.ndarray,
    P_filt: np.ndarray,
    innovations: np.ndarray,
    precisions: np.ndarray,
    gains: np.ndarray,
) -> np.ndarray:
    """alpha_hat_t = a_t|t + P_t|t T' r_t with r_n = 0, batched over the last axis."""
    n, p, k = a_filt.shape
    Z, T_mat = model.Z, model.T_mat
    eye_p = np.eye(p)
    smoothed = np.empty_like(a_filt)
    r = np.zeros((p, k))
    for t in range(n - 1, -1, -1):
        Tr = T_mat.T @ r
        smoothed[t] = a_filt[t] + P_filt[t] @ Tr
        L = eye_p - gains[t] @ Z
        r = Z.T @ (precisions[t] @ innovations[t]) + L.T @ Tr
    return smoothed


def _backward_covs(
    model: StateSpaceModel, P_filt: np.ndarray, precisions: np.ndarray, gains: np.ndarray
) -> np.ndarray:
    n, p, _ = P_filt.shape
    Z, T_mat = model.Z, model.T_mat
    eye_p = np.eye(p)
    covs = np.empty_like(P_filt)
    N = np.zeros((p, p))
    for t in range(n - 1, -1, -1):
        TNT = T_mat.T @ N @ T_mat
        covs[t] = _symmetrize(P_filt[t] - P_filt[t] @ TNT @ P_filt[t])
        L = eye_p - gains[t] @ Z
        N = _symmetrize(Z.T @ precisions[t] @ Z + L.T @ TNT @ L)
    return covs


def _check_observations(model: StateSpaceModel, y) -> np.ndarray:
    arr = np.asarray(y, dtype=float)
    if arr.ndim == 1 and model.d == 1:
        arr = arr[:, None]
    if arr.ndim != 2 or arr.shape[1] != model.d:
        raise StructuralError(
            f"observations have shape {np.shape(y)}, model expects (T, {model.d})"
        )
    if arr.shape[0] < 1:
        raise StructuralError("need at least one observation")
    if not np.all(np.isfinite(arr)):
        raise StructuralError("observations must be finite (missing values are not supported)")
    return arr


def kalman_filter(model: StateSpaceModel, y) -> FilterOutput:
    """
    Run the Kalman filter and evaluate the Gaussian log-likelihood.

    The first steps start from P_init = kappa * I and their likelihood terms
    are included as they are (big-kappa diffuse approximation). Use
    ``FilterOutput.diffuse_log_likelihood`` to drop them.

    Args:
        model: State-space system
        y: Observations, shape (T, d) (or (T,) when d == 1)

    Returns:
        FilterOutput with predicted/filtered moments and likelihood terms
    """
    y = _check_observations(model, y)
    n = y.shape[0]
    cov = _covariance_pass(model, n)
    a_pred, a_filt, v = _means_pass(model, cov, y[:, :, None])
    v = v[:, :, 0]

    quad = np.einsum("ti,tij,tj->t", v, cov.F_inv, v)
    terms = -0.5 * (model.d * LOG_2PI + cov.log_det_F + quad)
    terms[~cov.informative] = 0.0
    if not np.all(np.isfinite(terms)):
        bad = int(np.flatnonzero(~np.isfinite(terms))[0])
        raise NumericalError("non-finite log-likelihood term", time_index=bad)

    return FilterOutput(
        predicted_means=a_pred[:, :, 0],
        predicted_covs=cov.P_pred,
        filtered_means=a_filt[:, :, 0],
        filtered_covs=cov.P_filt,
        innovations=v,
        innovation_covs=cov.F,
        innovation_precisions=cov.F_inv,
        kalman_gains=cov.gains,
        log_likelihood_terms=terms,
    )


def kalman_smoother(model: StateSpaceModel, filt: FilterOutput) -> SmootherOutput:
    """Backward smoothing pass over a filter run on the same model and data."""
    if filt.filtered_means.shape[1] != model.p or filt.innovations.shape[1] != model.d:
        raise StructuralError("filter output does not belong to this model")
    means = _backward_means(
        model,
        filt.filtered_means[:, :, None],
        filt.filtered_covs,
        filt.innovations[:, :, None],
        filt.innovation_precisions,
        filt.kalman_gains,
    )[:, :, 0]
    covs = _backward_covs(model, filt.filtered_covs, filt.innovation_precisions, filt.kalman_gains)
    return SmootherOutput(means=means, covs=covs)


def simulate_state_space(
    model: StateSpaceModel, n: int, rng: np.random.Generator, n_paths: int = 1
) -> Tuple[np.ndarray, np.ndarray]:
    """
    Draw unconditional (y, alpha) paths from the model.

    Returns arrays of shape (n, d, n_paths) and (n, p, n_paths).
    """
    p, d = model.p, model.d
    init_factor = psd_factor(np.asarray(model.P_init))
    state_factor = psd_factor(np.asarray(model.Omega))
    obs_factor = psd_factor(np.asarray(model.Sigma))

    init_noise = rng.standard_normal((p, n_paths))
    state_noise = rng.standard_normal((max(n - 1, 0), p, n_paths))
    obs_noise = rng.standard_normal((n, d, n_paths))

    alpha = np.empty((n, p, n_paths))
    alpha[0] = model.a_init[:, None] + init_factor @ init_noise
    for t in range(1, n):
        alpha[t] = model.d_state[:, None] + model.T_mat @ alpha[t - 1] + state_factor @ state_noise[t - 1]
    y = model.c[None, :, None] + np.einsum("ij,tjk->tik", model.Z, alpha)
    y += np.einsum("ij,tjk->tik", obs_factor, obs_noise)
    return y, alpha


def simulation_smoother_draws(
    model: StateSpaceModel, y, rng: np.random.Generator, n_draws: int
) -> np.ndarray:
    """
    Draw ``n_draws`` state paths from p(alpha | y) by mean correction.

    Each draw is alpha+ + E[alpha | y - y+] under the homogeneous system, where
    (y+, alpha+) is an unconditional path. Returns shape (n_draws, T, p).
    """
    y = _check_observations(model, y)
    n = y.shape[0]
    cov = _covariance_pass(model, n)
    y_plus, alpha_plus = simulate_state_space(model, n, rng, n_paths=n_draws)

    diff = y[:, :, None] - y_plus
    _, a_filt, v = _means_pass(model, cov, diff, homogeneous=True)
    correction = _backward_means(model, a_filt, cov.P_filt, v, cov.F_inv, cov.gains)
    draws = alpha_plus + correction
    return np.transpose(draws, (2, 0, 1))


def simulation_smoother(model: StateSpaceModel, y, rng: np.random.Generator) -> np.ndarray:
    """One exact draw (T, p) of the latent state path given the data."""
    return simulation_smoother_draws(model, y, rng, 1)[0]

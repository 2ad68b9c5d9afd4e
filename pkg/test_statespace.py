#!/usr/bin/env python3
"""
Kalman filter, smoother and simulation smoother checks against a dense
joint-Gaussian oracle built by stacking the whole sample.
"""
import numpy as np
import pytest
from scipy import stats

from output_gap.errors import NumericalError, StructuralError
from output_gap.models import ModelSpec, ParameterVector, build_model, simulate_data
from output_gap.statespace import (
    StateSpaceModel,
    kalman_filter,
    kalman_smoother,
    simulation_smoother,
    simulation_smoother_draws,
)


def random_model(rng, p, d, kappa=5.0, singular_omega=False):
    T_mat = rng.normal(size=(p, p))
    T_mat *= 0.9 / max(1e-8, np.max(np.abs(np.linalg.eigvals(T_mat))))
    A = rng.normal(size=(p, p))
    if singular_omega and p > 1:
        A[:, -1] = 0.0
    B = rng.normal(size=(d, d))
    return StateSpaceModel(
        c=rng.normal(size=d),
        d_state=rng.normal(size=p),
        Z=rng.normal(size=(d, p)),
        T_mat=T_mat,
        Sigma=B @ B.T + 0.1 * np.eye(d),
        Omega=A @ A.T,
        kappa_init=kappa,
        a_init=rng.normal(size=p),
    )


def joint_gaussian(model, n):
    """Mean and covariance of the stacked states and observations."""
    p, d = model.p, model.d
    T_mat = np.asarray(model.T_mat)
    means = [np.asarray(model.a_init)]
    for _ in range(n - 1):
        means.append(model.d_state + T_mat @ means[-1])
    m_alpha = np.concatenate(means)

    # alpha = G u with u = (alpha_1 - a_1, eta_1, ..., eta_n-1)
    G = np.zeros((n * p, n * p))
    for t in range(n):
        for j in range(t + 1):
            G[t * p:(t + 1) * p, j * p:(j + 1) * p] = np.linalg.matrix_power(T_mat, t - j)
    noise_cov = np.zeros((n * p, n * p))
    noise_cov[:p, :p] = model.P_init
    for j in range(1, n):
        noise_cov[j * p:(j + 1) * p, j * p:(j + 1) * p] = model.Omega
    cov_alpha = G @ noise_cov @ G.T

    Zbig = np.kron(np.eye(n), model.Z)
    m_y = np.tile(model.c, n) + Zbig @ m_alpha
    cov_y = Zbig @ cov_alpha @ Zbig.T + np.kron(np.eye(n), model.Sigma)
    cov_alpha_y = cov_alpha @ Zbig.T
    return m_alpha, cov_alpha, m_y, cov_y, cov_alpha_y


def test_filter_and_smoother_match_dense_oracle():
    """50 random models, p <= 5, d <= 2, T <= 6."""
    rng = np.random.default_rng(20240601)
    for trial in range(50):
        p = int(rng.integers(1, 6))
        d = int(rng.integers(1, 3))
        n = int(rng.integers(1, 7))
        model = random_model(rng, p, d, singular_omega=trial % 3 == 0)
        y = rng.normal(size=(n, d)) * 2.0

        m_alpha, cov_alpha, m_y, cov_y, cov_alpha_y = joint_gaussian(model, n)
        expected_ll = stats.multivariate_normal.logpdf(y.ravel(), mean=m_y, cov=cov_y)
        gain = np.linalg.solve(cov_y, cov_alpha_y.T).T
        expected_means = (m_alpha + gain @ (y.ravel() - m_y)).reshape(n, p)
        expected_covs = cov_alpha - gain @ cov_alpha_y.T

        filt = kalman_filter(model, y)
        smooth = kalman_smoother(model, filt)
        assert abs(filt.log_likelihood - expected_ll) < 1e-8
        np.testing.assert_allclose(smooth.means, expected_means, rtol=0, atol=1e-8)
        for t in range(n):
            block = expected_covs[t * p:(t + 1) * p, t * p:(t + 1) * p]
            np.testing.assert_allclose(smooth.covs[t], block, rtol=0, atol=1e-8)


def test_zero_observation_noise_tracks_data():
    model = StateSpaceModel(
        c=[0.0], d_state=[0.0], Z=[[1.0]], T_mat=[[1.0]], Sigma=[[0.0]], Omega=[[1.0]]
    )
    y = np.array([0.3, -1.2, 2.5, 0.0, 4.1])
    filt = kalman_filter(model, y)
    np.testing.assert_allclose(filt.filtered_means[:, 0], y, rtol=1e-9, atol=1e-8)


def test_unobservable_states_decouple_from_data():
    model = StateSpaceModel(
        c=[0.5], d_state=[0.0, 0.0], Z=[[0.0, 0.0]], T_mat=np.eye(2) * 0.5,
        Sigma=[[2.0]], Omega=np.eye(2),
    )
    y = np.array([1.0, -0.5, 3.0, 0.25])
    filt = kalman_filter(model, y)
    expected = stats.norm.logpdf(y, loc=0.5, scale=np.sqrt(2.0)).sum()
    assert filt.log_likelihood == pytest.approx(expected, abs=1e-12)


def test_no_state_noise_smooths_to_deterministic_path():
    T_mat = np.array([[0.9, 0.2], [0.0, 0.7]])
    a1 = np.array([1.0, -2.0])
    model = StateSpaceModel(
        c=[0.0], d_state=[0.1, 0.0], Z=[[1.0, 1.0]], T_mat=T_mat,
        Sigma=[[0.5]], Omega=np.zeros((2, 2)), a_init=a1, P_init=np.zeros((2, 2)),
    )
    y = np.array([0.3, 2.0, -1.0, 0.7, 1.5])
    smooth = kalman_smoother(model, kalman_filter(model, y))
    expected = [a1]
    for _ in range(4):
        expected.append(model.d_state + T_mat @ expected[-1])
    np.testing.assert_allclose(smooth.means, np.array(expected), atol=1e-12)


def test_single_observation_smoother_equals_filter():
    rng = np.random.default_rng(3)
    model = random_model(rng, 3, 2)
    y = rng.normal(size=(1, 2))
    filt = kalman_filter(model, y)
    smooth = kalman_smoother(model, filt)
    np.testing.assert_array_equal(smooth.means, filt.filtered_means)


def test_last_smoothed_state_equals_last_filtered_state():
    rng = np.random.default_rng(11)
    model = random_model(rng, 4, 2)
    y = rng.normal(size=(30, 2))
    filt = kalman_filter(model, y)
    smooth = kalman_smoother(model, filt)
    np.testing.assert_array_equal(smooth.means[-1], filt.filtered_means[-1])
    for t in range(30):
        assert np.trace(smooth.covs[t]) <= np.trace(filt.filtered_covs[t]) + 1e-10


def test_likelihood_invariant_under_state_permutation():
    rng = np.random.default_rng(5)
    for _ in range(10):
        model = random_model(rng, 4, 2)
        y = rng.normal(size=(6, 2))
        perm = rng.permutation(4)
        P = np.eye(4)[perm]
        permuted = StateSpaceModel(
            c=model.c,
            d_state=P @ model.d_state,
            Z=model.Z @ P.T,
            T_mat=P @ model.T_mat @ P.T,
            Sigma=model.Sigma,
            Omega=P @ model.Omega @ P.T,
            kappa_init=model.kappa_init,
            a_init=P @ model.a_init,
        )
        assert kalman_filter(permuted, y).log_likelihood == pytest.approx(
            kalman_filter(model, y).log_likelihood, abs=1e-8
        )


def test_diffuse_initialization_insensitivity():
    spec = ModelSpec.from_label("uni-lt")
    params = ParameterVector(
        sigma2_eps=0.3, sigma2_eta=0.2, sigma2_zeta=0.01, sigma2_kappa=0.5, rho=0.9, lam=0.5
    )
    y, _ = simulate_data(spec, params, 80, np.random.default_rng(8), kappa0=0.0)
    base = kalman_filter(build_model(spec, params, kappa_init=1e7), y)
    doubled = kalman_filter(build_model(spec, params, kappa_init=2e7), y)
    assert abs(base.diffuse_log_likelihood(spec.p) - doubled.diffuse_log_likelihood(spec.p)) < 1e-6


def test_singular_innovation_covariance_names_time_index():
    model = StateSpaceModel(
        c=[0.0, 0.0], d_state=[0.0], Z=[[1.0], [1.0]], T_mat=[[0.5]],
        Sigma=np.zeros((2, 2)), Omega=[[1.0]], kappa_init=1.0,
    )
    with pytest.raises(NumericalError) as excinfo:
        kalman_filter(model, np.ones((3, 2)))
    assert excinfo.value.time_index == 0


def test_model_validation():
    with pytest.raises(StructuralError):
        StateSpaceModel(c=[0.0], d_state=[0.0], Z=[[1.0]], T_mat=[[1.0]],
                        Sigma=[[1.0]], Omega=[[1.0]], kappa_init=0.0)
    with pytest.raises(StructuralError):
        StateSpaceModel(c=[0.0], d_state=[0.0, 0.0], Z=[[1.0, 0.0]], T_mat=np.eye(2),
                        Sigma=[[1.0]], Omega=[[1.0, 0.5], [0.0, 1.0]])
    with pytest.raises(StructuralError):
        StateSpaceModel(c=[0.0], d_state=[0.0], Z=[[1.0]], T_mat=[[1.0]],
                        Sigma=[[-1.0]], Omega=[[1.0]])
    model = StateSpaceModel(c=[0.0], d_state=[0.0], Z=[[1.0]], T_mat=[[1.0]],
                            Sigma=[[1.0]], Omega=[[1.0]])
    with pytest.raises(ValueError):
        model.T_mat[0, 0] = 2.0
    with pytest.raises(StructuralError):
        kalman_filter(model, np.ones((4, 2)))


def test_degenerate_model_draws_equal_deterministic_path():
    a1 = np.array([1.0, 0.5])
    T_mat = np.array([[1.0, 1.0], [0.0, 1.0]])
    model = StateSpaceModel(
        c=[0.0], d_state=[0.0, 0.0], Z=[[1.0, 0.0]], T_mat=T_mat,
        Sigma=[[0.0]], Omega=np.zeros((2, 2)), a_init=a1, P_init=np.zeros((2, 2)),
    )
    path = [a1]
    for _ in range(5):
        path.append(T_mat @ path[-1])
    path = np.array(path)
    y = path[:, :1]
    rng = np.random.default_rng(0)
    for _ in range(3):
        np.testing.assert_allclose(simulation_smoother(model, y, rng), path, atol=1e-12)


def _two_state_model():
    return StateSpaceModel(
        c=[0.0], d_state=[0.0, 0.0], Z=[[1.0, 1.0]],
        T_mat=[[1.0, 0.0], [0.0, 0.6]], Sigma=[[0.5]], Omega=np.diag([0.2, 1.0]), kappa_init=10.0,
    )


def test_simulation_smoother_mean_converges_to_smoother():
    model = _two_state_model()
    rng = np.random.default_rng(2024)
    y, _ = _simulated(model, 400, rng)
    smooth = kalman_smoother(model, kalman_filter(model, y))

    n_batches, batch = 10, 1000
    total = np.zeros((400, 2))
    total_sq = np.zeros((400, 2))
    for _ in range(n_batches):
        draws = simulation_smoother_draws(model, y, rng, batch)
        total += draws.sum(axis=0)
        total_sq += (draws ** 2).sum(axis=0)
    n = n_batches * batch
    mean = total / n
    std = np.sqrt(total_sq / n - mean ** 2)
    inside = np.abs(mean - smooth.means) < 3.0 * std / np.sqrt(n)
    assert inside.mean() >= 0.99


def test_simulation_smoother_covariance_matches_smoother():
    model = _two_state_model()
    rng = np.random.default_rng(77)
    y, _ = _simulated(model, 30, rng)
    smooth = kalman_smoother(model, kalman_filter(model, y))
    draws = simulation_smoother_draws(model, y, rng, 10000)
    t = 15
    sample_cov = np.cov(draws[:, t, :], rowvar=False)
    assert np.linalg.norm(sample_cov - smooth.covs[t]) < 0.05 * np.linalg.norm(smooth.covs[t])


def test_simulation_smoother_is_reproducible():
    spec = ModelSpec.from_label("biv-lt")
    params = ParameterVector(
        sigma2_eps=0.2, sigma2_eta=0.1, sigma2_zeta=0.01, sigma2_kappa=0.6, rho=0.9, lam=0.5,
        sigma2_vareps=0.4, sigma2_xi=0.1, theta0=0.3, theta1=-0.1,
    )
    y, _ = simulate_data(spec, params, 40, np.random.default_rng(1))
    model = build_model(spec, params)
    first = simulation_smoother(model, y, np.random.default_rng(99))
    second = simulation_smoother(model, y, np.random.default_rng(99))
    assert np.array_equal(first, second)
    # the lagged-cycle row carries no noise, so the path stays a companion pair
    psi, lag = spec.state_index("psi"), spec.state_index("psi_lag")
    np.testing.assert_allclose(first[1:, lag], first[:-1, psi], atol=1e-6)


def _simulated(model, n, rng):
    from output_gap.statespace import simulate_state_space
    y, alpha = simulate_state_space(model, n, rng)
    return y[:, :, 0], alpha[:, :, 0]


if __name__ == "__main__":
    raise SystemExit(pytest.main([__file__, "-v"]))

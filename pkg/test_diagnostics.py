#!/usr/bin/env python3
"""
Posterior summary and diagnostic tests.
"""
import numpy as np
import pytest
from statsmodels.tsa.filters.hp_filter import hpfilter

from output_gap.diagnostics import (
    EFFECT_LABELS,
    SUMMARY_COLUMNS,
    TurningPointKind,
    autocorrelation,
    chain_autocorrelations,
    credible_bands,
    cycle_correlation,
    derived_effects,
    effective_sample_size,
    effective_sample_sizes,
    geweke_z,
    hp_filter,
    hpd_interval,
    map_estimate,
    posterior_summary,
    smoothed_map_states,
    summary_frame,
    turning_points,
)
from output_gap.errors import DegenerateChainError, StructuralError
from output_gap.models import ModelSpec, build_model
from output_gap.sampler import PosteriorDraws
from output_gap.statespace import StateSpaceModel, kalman_filter, kalman_smoother


def make_draws(label: str, n: int, seed: int = 0) -> PosteriorDraws:
    spec = ModelSpec.from_label(label)
    rng = np.random.default_rng(seed)
    columns = []
    for name in spec.active_parameters:
        if name == "rho":
            columns.append(rng.uniform(0.6, 0.9, n))
        elif name == "lam":
            columns.append(rng.uniform(0.2, 0.5, n))
        elif name.startswith("sigma2_"):
            columns.append(rng.uniform(0.01, 0.1, n))
        else:
            columns.append(rng.normal(0.2, 0.1, n))
    return PosteriorDraws(
        spec_label=label,
        names=spec.active_parameters,
        draws=np.column_stack(columns),
        log_posterior=rng.normal(size=n),
        acceptance_rates={},
        metadata={},
        trend_paths=rng.normal(size=(n, 12)),
        cycle_paths=rng.normal(size=(n, 12)),
    )


def test_hpd_interval_picks_first_shortest_window():
    assert hpd_interval(np.arange(1000.0), 0.95) == (0.0, 949.0)
    lower, upper = hpd_interval(np.random.default_rng(0).normal(size=100000), 0.95)
    assert lower == pytest.approx(-1.96, abs=0.05)
    assert upper == pytest.approx(1.96, abs=0.05)


def test_hpd_interval_is_shorter_than_equal_tails_for_skewed_draws():
    x = np.random.default_rng(1).exponential(size=20000)
    lower, upper = hpd_interval(x, 0.9)
    q_low, q_high = np.quantile(x, [0.05, 0.95])
    assert upper - lower < q_high - q_low
    assert lower < 0.01


def test_hpd_interval_needs_enough_draws():
    with pytest.raises(StructuralError):
        hpd_interval(np.ones(99))


def test_autocorrelation_and_effective_sample_size():
    rng = np.random.default_rng(2)
    n = 20000
    x = np.empty(n)
    x[0] = 0.0
    for t in range(1, n):
        x[t] = 0.5 * x[t - 1] + rng.normal()
    acf = autocorrelation(x, 5)
    assert acf[0] == pytest.approx(1.0)
    assert acf[1] == pytest.approx(0.5, abs=0.03)
    iid = rng.normal(size=n)
    assert effective_sample_size(iid) == pytest.approx(n, rel=0.2)
    assert effective_sample_size(x) < 0.5 * n
    with pytest.raises(DegenerateChainError):
        autocorrelation(np.full(100, 2.0))


def test_geweke_on_stationary_chain():
    x = np.random.default_rng(3).normal(size=5000)
    z = geweke_z(x)
    assert abs(z) < 4.0
    assert geweke_z(2.0 * x + 3.0) == pytest.approx(z)
    assert abs(geweke_z(-x)) == pytest.approx(abs(z))


def test_geweke_degenerate_cases():
    shifted = np.concatenate([np.zeros(500), np.ones(500)])
    assert geweke_z(shifted) == -np.inf
    with pytest.raises(DegenerateChainError):
        geweke_z(np.ones(1000))
    with pytest.raises(StructuralError):
        geweke_z(np.zeros(999))


def test_map_estimate_uses_highest_log_posterior():
    draws = make_draws("uni-ll", 200)
    k = int(np.argmax(draws.log_posterior))
    assert map_estimate(draws).rho == draws.column("rho")[k]


def test_bivariate_summary_rows():
    draws = make_draws("biv-lt", 1500)
    rows = posterior_summary(draws)
    names = [row.name for row in rows]
    assert names[: len(draws.names)] == list(draws.names)
    assert "period" in names
    assert set(EFFECT_LABELS.values()) <= set(names)
    assert "change_effect" in names and "theta0*phi1+theta1" in names

    frame = summary_frame(rows)
    assert list(frame.columns) == SUMMARY_COLUMNS
    rho = frame.set_index("Param").loc["rho"]
    assert rho["HPD lower"] <= rho["Mean"] <= rho["HPD upper"]
    assert np.isfinite(rho["Geweke"])


def test_small_summary_leaves_interval_columns_empty():
    rows = posterior_summary(make_draws("uni-lt", 50))
    assert all(np.isnan(row.hpd_lower) and np.isnan(row.geweke_z) for row in rows)


def test_derived_effects():
    draws = make_draws("biv-ll", 300)
    effects = derived_effects(draws)
    theta0, theta1 = draws.column("theta0"), draws.column("theta1")
    rho, lam = draws.column("rho"), draws.column("lam")
    phi1, phi2 = 2 * rho * np.cos(lam), -rho ** 2
    np.testing.assert_allclose(effects.frame["gap_loading"], theta0 * phi1 + theta1)
    np.testing.assert_allclose(effects.frame["lagged_gap_loading"], theta0 * phi2)
    assert effects.at(0).level_effect == pytest.approx(theta0[0] * (phi1[0] + phi2[0]) + theta1[0])
    assert set(effects.hpd) == {"level_effect", "change_effect", "gap_loading", "lagged_gap_loading"}
    with pytest.raises(StructuralError):
        derived_effects(make_draws("uni-ll", 300))


def test_credible_bands():
    paths = np.random.default_rng(4).normal(size=(500, 6))
    lower, upper = credible_bands(paths, 0.9)
    assert lower.shape == (6,) and np.all(lower < upper)
    few_lower, few_upper = credible_bands(paths[:20], 0.9)
    np.testing.assert_allclose(few_lower, np.quantile(paths[:20], 0.05, axis=0))


def test_hp_filter_matches_statsmodels():
    rng = np.random.default_rng(5)
    y = np.cumsum(rng.normal(0.5, 1.0, 120))
    _, expected = hpfilter(y, lamb=1600)
    np.testing.assert_allclose(hp_filter(y, 1600.0), expected, rtol=0, atol=1e-8)


def test_hp_filter_keeps_linear_trend():
    y = 3.0 + 0.25 * np.arange(40)
    np.testing.assert_allclose(hp_filter(y), y, atol=1e-8)


def test_hp_filter_equals_integrated_random_walk_smoother():
    rng = np.random.default_rng(6)
    n = 200
    y = np.cumsum(rng.normal(size=n))
    y -= y[0]
    model = StateSpaceModel(
        c=[0.0], d_state=[0.0, 0.0], Z=[[1.0, 0.0]], T_mat=[[1.0, 1.0], [0.0, 1.0]],
        Sigma=[[1.0]], Omega=np.diag([0.0, 1.0 / 1600.0]), kappa_init=1e8,
    )
    smoothed = kalman_smoother(model, kalman_filter(model, y)).means[:, 0]
    gap = np.abs(smoothed - hp_filter(y, 1600.0))
    assert gap[10:191].max() < 1e-6
    assert gap.max() < 1e-5


def test_hpd_interval_matches_exhaustive_search():
    rng = np.random.default_rng(8)
    for _ in range(1000):
        n = int(rng.integers(100, 300))
        level = float(rng.uniform(0.5, 0.99))
        x = np.sort(rng.standard_t(3, size=n))
        m = int(np.ceil(level * n - 1e-9))
        best = None
        for j in range(n - m + 1):
            width = x[j + m - 1] - x[j]
            if best is None or width < best[0]:
                best = (width, x[j], x[j + m - 1])
        assert hpd_interval(rng.permutation(x), level) == (best[1], best[2])


@pytest.mark.slow
def test_geweke_calibration_on_iid_chains():
    rng = np.random.default_rng(9)
    z = np.array([geweke_z(rng.normal(size=10000)) for _ in range(500)])
    assert np.mean(np.abs(z) < 3.0) >= 0.99


def test_turning_points_of_sine_wave():
    cycle = np.sin(2 * np.pi * np.arange(60) / 20.0)
    points = turning_points(cycle)
    assert [p.index for p in points] == [5, 15, 25, 35, 45, 55]
    kinds = [p.kind for p in points]
    assert kinds[0] is TurningPointKind.PEAK
    assert all(a is not b for a, b in zip(kinds, kinds[1:]))


def test_turning_points_ignore_small_blips():
    cycle = np.array([0.0, 1.0, 2.0, 3.0, 2.9, 3.1, 2.0, 1.0, 0.0, -1.0, 0.0, 1.0])
    points = turning_points(cycle)
    assert [(p.index, p.kind) for p in points] == [
        (5, TurningPointKind.PEAK), (9, TurningPointKind.TROUGH),
    ]


@pytest.mark.parametrize("cycle", [np.arange(20.0), -np.arange(20.0), np.ones(20)])
def test_turning_points_of_monotone_or_flat_paths(cycle):
    assert turning_points(cycle) == []


def test_hp_filter_keeps_constant_series():
    np.testing.assert_allclose(hp_filter(np.full(30, 2.5)), 2.5, atol=1e-10)


def test_chain_autocorrelations_and_sample_sizes():
    draws = make_draws("uni-ll", 400)
    draws.draws[:, list(draws.names).index("lam")] = 0.3
    frame = chain_autocorrelations(draws, max_lag=10)
    assert list(frame.columns) == ["lag"] + list(draws.names)
    assert list(frame["lag"]) == list(range(11))
    np.testing.assert_allclose(frame["rho"], autocorrelation(draws.column("rho"), 10))
    assert frame["lam"].isna().all()

    sizes = effective_sample_sizes(draws, max_lag=10)
    assert sizes["lam"] is None
    assert sizes["rho"] == pytest.approx(effective_sample_size(draws.column("rho"), 10))

    short = chain_autocorrelations(make_draws("uni-ll", 5), max_lag=50)
    assert len(short) == 5


def test_smoothed_map_states_use_kalman_smoother_at_map():
    draws = make_draws("uni-ll", 200, seed=3)
    y = np.random.default_rng(10).normal(size=(12, 1))
    states = smoothed_map_states(draws, y, kappa_init=1e6)
    model = build_model(draws.spec, map_estimate(draws), kappa_init=1e6)
    expected = kalman_smoother(model, kalman_filter(model, y)).means
    assert states.shape == (12, draws.spec.p)
    np.testing.assert_allclose(states, expected)
    cycle = states[:, draws.spec.state_index("psi")]
    assert not np.allclose(cycle, draws.cycle_paths[int(np.argmax(draws.log_posterior))])


def test_cycle_correlation():
    x = np.random.default_rng(7).normal(size=30)
    assert cycle_correlation(x, 2 * x) == pytest.approx(1.0)
    with pytest.raises(StructuralError):
        cycle_correlation(x, x[:-1])


if __name__ == "__main__":
    raise SystemExit(pytest.main([__file__, "-v"]))

#!/usr/bin/env python3
"""
Model specification tests: state layouts, system matrices and the simulator.
"""
import numpy as np
import pytest

from output_gap.errors import DomainError, StructuralError
from output_gap.models import (
    DerivedEffects,
    ModelSpec,
    ParameterVector,
    TrendType,
    all_specs,
    build_model,
    cycle_coefficients,
    cycle_parameters,
    cycle_period,
    simulate_data,
)


def full_parameters(spec: ModelSpec) -> ParameterVector:
    values = {
        "sigma2_eps": 0.3,
        "sigma2_eta": 0.2,
        "sigma2_zeta": 0.05,
        "sigma2_kappa": 0.8,
        "rho": 0.85,
        "lam": 0.4,
        "sigma2_vareps": 0.25,
        "sigma2_xi": 0.1,
        "theta0": 0.3,
        "theta1": -0.2,
        "drift": 0.5,
    }
    return ParameterVector(**{name: values[name] for name in spec.active_parameters})


def test_eight_specifications_with_expected_dimensions():
    specs = all_specs()
    assert len(specs) == 8
    dims = {spec.label: (spec.p, spec.d) for spec in specs}
    assert dims["uni-ll"] == (3, 1)
    assert dims["uni-lld"] == (3, 1)
    assert dims["uni-lt"] == (4, 1)
    assert dims["uni-irw"] == (4, 1)
    assert dims["biv-ll"] == (4, 2)
    assert dims["biv-lt"] == (5, 2)


def test_labels_round_trip_and_reject_unknown():
    for spec in all_specs():
        assert ModelSpec.from_label(spec.label) == spec
    assert ModelSpec.from_label(" BIV-IRW ").trend is TrendType.IRW
    with pytest.raises(StructuralError):
        ModelSpec.from_label("tri-lt")
    with pytest.raises(StructuralError):
        ModelSpec.from_label("uni")


def test_active_parameters_per_trend():
    assert "sigma2_zeta" not in ModelSpec.from_label("uni-ll").active_parameters
    assert "drift" in ModelSpec.from_label("uni-lld").active_parameters
    irw = ModelSpec.from_label("biv-irw").active_parameters
    assert "sigma2_eta" not in irw and "sigma2_zeta" in irw
    assert {"theta0", "theta1", "sigma2_xi", "sigma2_vareps"} <= set(irw)


def test_cycle_mapping_and_inverse():
    phi1, phi2 = cycle_coefficients(0.9, 0.3)
    assert phi1 == pytest.approx(2 * 0.9 * np.cos(0.3))
    assert phi2 == pytest.approx(-0.81)
    rho, lam = cycle_parameters(phi1, phi2)
    assert rho == pytest.approx(0.9)
    assert lam == pytest.approx(0.3)
    assert cycle_period(np.pi / 16) == pytest.approx(32.0)


@pytest.mark.parametrize("rho, lam", [(1.0, 0.5), (-0.1, 0.5), (0.5, 0.0), (0.5, np.pi)])
def test_cycle_domain_errors(rho, lam):
    with pytest.raises(DomainError):
        cycle_coefficients(rho, lam)


def test_wider_frequency_support():
    phi1, _ = cycle_coefficients(0.5, 4.0, lam_upper=2 * np.pi)
    assert phi1 == pytest.approx(np.cos(4.0))


def test_bivariate_local_linear_trend_matrices():
    spec = ModelSpec.from_label("biv-lt")
    params = full_parameters(spec)
    model = build_model(spec, params)
    phi1, phi2 = cycle_coefficients(params.rho, params.lam)
    i = {name: k for k, name in enumerate(spec.state_names)}

    np.testing.assert_array_equal(model.Z, [[1, 0, 1, 0, 0], [0, 0, 0, 0, 1]])
    assert model.T_mat[i["mu"], i["beta"]] == 1.0
    assert model.T_mat[i["psi"], i["psi"]] == pytest.approx(phi1)
    assert model.T_mat[i["psi"], i["psi_lag"]] == pytest.approx(phi2)
    assert model.T_mat[i["psi_lag"], i["psi"]] == 1.0
    assert model.T_mat[i["tau"], i["psi"]] == pytest.approx(0.3 * phi1 - 0.2)
    assert model.T_mat[i["tau"], i["psi_lag"]] == pytest.approx(0.3 * phi2)
    assert model.Omega[i["psi"], i["tau"]] == pytest.approx(0.3 * 0.8)
    assert model.Omega[i["tau"], i["tau"]] == pytest.approx(0.1 + 0.09 * 0.8)
    np.testing.assert_array_equal(np.diag(model.Sigma), [0.3, 0.25])
    np.testing.assert_allclose(model.P_init, 1e7 * np.eye(5))


def test_drift_enters_state_intercept():
    spec = ModelSpec.from_label("uni-lld")
    model = build_model(spec, full_parameters(spec))
    np.testing.assert_array_equal(model.d_state, [0.5, 0.0, 0.0])


def test_irw_has_no_level_noise():
    spec = ModelSpec.from_label("uni-irw")
    model = build_model(spec, full_parameters(spec))
    assert model.Omega[0, 0] == 0.0
    assert model.Omega[1, 1] == pytest.approx(0.05)


def test_inactive_parameter_rejected():
    spec = ModelSpec.from_label("uni-ll")
    with pytest.raises(StructuralError):
        build_model(spec, full_parameters(spec).replace(theta0=0.4))


def test_invalid_values_rejected():
    spec = ModelSpec.from_label("uni-lt")
    params = full_parameters(spec)
    with pytest.raises(DomainError):
        build_model(spec, params.replace(sigma2_eps=-1.0))
    with pytest.raises(DomainError):
        build_model(spec, params.replace(rho=1.0))
    with pytest.raises(DomainError):
        build_model(spec, params.replace(sigma2_eta=0.0))
    with pytest.raises(StructuralError):
        ParameterVector.from_dict({"gamma": 1.0})


def test_derived_effects():
    params = full_parameters(ModelSpec.from_label("biv-ll"))
    effects = DerivedEffects.from_parameters(params)
    phi1, phi2 = cycle_coefficients(params.rho, params.lam)
    assert effects.gap_loading == pytest.approx(0.3 * phi1 - 0.2)
    assert effects.lagged_gap_loading == pytest.approx(0.3 * phi2)
    assert effects.level_effect == pytest.approx(effects.gap_loading + effects.lagged_gap_loading)


def test_simulation_shapes_and_reproducibility():
    for spec in all_specs():
        params = full_parameters(spec)
        y1, s1 = simulate_data(spec, params, 40, np.random.default_rng(4))
        y2, s2 = simulate_data(spec, params, 40, np.random.default_rng(4))
        assert y1.shape == (40, spec.d)
        assert s1.shape == (40, spec.p)
        assert np.array_equal(y1, y2) and np.array_equal(s1, s2)


def test_simulation_identities():
    spec = ModelSpec.from_label("biv-lt")
    params = full_parameters(spec)
    _, states = simulate_data(spec, params, 60, np.random.default_rng(12))
    i = {name: k for k, name in enumerate(spec.state_names)}
    np.testing.assert_allclose(states[1:, i["psi_lag"]], states[:-1, i["psi"]], atol=1e-8)


def test_degenerate_simulation_is_deterministic():
    spec = ModelSpec.from_label("uni-lld")
    params = ParameterVector(sigma2_eps=0.0, sigma2_eta=0.0, sigma2_kappa=0.0, rho=0.0, lam=0.5, drift=0.25)
    y, states = simulate_data(spec, params, 10, np.random.default_rng(0), kappa0=0.0)
    np.testing.assert_allclose(y[:, 0], 0.25 * np.arange(10), atol=1e-12)
    np.testing.assert_allclose(states[:, 1], 0.0, atol=1e-12)


def test_integrated_random_walk_second_differences_have_slope_variance():
    spec = ModelSpec.from_label("uni-irw")
    params = full_parameters(spec).replace(sigma2_zeta=0.5)
    _, states = simulate_data(spec, params, 20000, np.random.default_rng(21), kappa0=0.0)
    curvature = np.diff(states[:, spec.state_index("mu")], n=2)
    assert np.var(curvature) == pytest.approx(0.5, rel=0.05)


def test_simulated_cycle_has_ar2_autocorrelation():
    spec = ModelSpec.from_label("uni-ll")
    params = full_parameters(spec).replace(rho=0.8, lam=0.4)
    _, states = simulate_data(spec, params, 20000, np.random.default_rng(22), kappa0=0.0)
    psi = states[:, spec.state_index("psi")]
    psi = psi - psi.mean()
    lag1 = np.dot(psi[:-1], psi[1:]) / np.dot(psi, psi)
    phi1, phi2 = cycle_coefficients(0.8, 0.4)
    assert lag1 == pytest.approx(phi1 / (1.0 - phi2), abs=0.02)


def test_simulation_too_short():
    spec = ModelSpec.from_label("uni-ll")
    with pytest.raises(StructuralError):
        simulate_data(spec, full_parameters(spec), 7, np.random.default_rng(0))


if __name__ == "__main__":
    raise SystemExit(pytest.main([__file__, "-v"]))

"""Least-squares engine and the three fit entry points."""

import numpy as np
import pytest

from erlyf import (
    GaussianNoise,
    InvalidParameterError,
    SingularJacobianError,
    fit_eit_trace,
    fit_field_series,
    fit_temperature_series,
    generate_synthetic_trace,
    initial_guess_from_trace,
)
from erlyf.fitting import (
    _fd_jacobian,
    _run_named_fit,
    eit_trace_model,
    levenberg_marquardt,
)
from erlyf.thermal import NqpParams, gamma_hf_vs_temperature
from erlyf.transitions import SpinWidthModel, spin_linewidth
from erlyf.units import kelvin_to_angular, mhz_per_mt2_to_si, mhz_to_angular, mt_to_tesla

TRUE_TRACE = {
    "gamma_opt": mhz_to_angular(32.0),
    "gamma_hf": mhz_to_angular(5.0),
    "omega_c": mhz_to_angular(15.0),
    "alpha0l": 1.4,
    "probe_center": 0.0,
    "couple_detuning": 0.0,
    "aux_depth": 0.21,
    "aux_center": -90e6,
    "aux_fwhm": mhz_to_angular(28.0),
    "amp_gain": 1.0,
    "phase_gain": 1.0,
    "phase_offset": 0.0,
}
GRID = np.linspace(-150e6, 150e6, 601)


def rosenbrock(x):
    return np.array([10.0 * (x[1] - x[0] ** 2), 1.0 - x[0]])


# ---------------------------------------------------------------------------
# optimiser core
# ---------------------------------------------------------------------------


def test_lm_converges_on_rosenbrock_from_100_random_starts():
    rng = np.random.default_rng(7)
    for _ in range(100):
        out = levenberg_marquardt(rosenbrock, rng.uniform(-2.0, 2.0, 2), max_iter=500)
        assert np.abs(out.x - 1.0).max() <= 1e-6


def test_lm_accepted_costs_never_increase():
    rng = np.random.default_rng(8)
    for _ in range(20):
        out = levenberg_marquardt(rosenbrock, rng.uniform(-2.0, 2.0, 2), max_iter=500)
        history = np.array(out.cost_history)
        assert np.all(np.diff(history) <= 0.0)


def test_lm_rejects_out_of_bounds_start():
    with pytest.raises(InvalidParameterError):
        levenberg_marquardt(rosenbrock, np.array([2.0, 2.0]), lower=np.zeros(2), upper=np.ones(2))


def test_lm_respects_bounds():
    out = levenberg_marquardt(
        rosenbrock,
        np.array([0.2, 0.2]),
        lower=np.array([-1.0, -1.0]),
        upper=np.array([0.5, 0.5]),
        max_iter=300,
    )
    assert np.all(out.x <= 0.5 + 1e-15)


def test_fd_jacobian_matches_richardson_on_interior_points():
    amp_data, phase_data = eit_trace_model(GRID, TRUE_TRACE)

    names = ("gamma_opt", "gamma_hf", "omega_c")

    def residual(x):
        params = dict(TRUE_TRACE)
        for name, value in zip(names, x):
            params[name] = value * mhz_to_angular(1.0)
        amp, phase = eit_trace_model(GRID, params)
        return np.concatenate([amp - amp_data, phase - phase_data])

    x0 = np.array([30.0, 6.0, 13.0])  # MHz units, smooth interior point
    jac = _fd_jacobian(residual, x0)
    for k in range(3):
        h = 1e-4 * max(abs(x0[k]), 1.0)

        def along(v):
            x = x0.copy()
            x[k] = v
            return residual(x)

        coarse = (along(x0[k] + h) - along(x0[k] - h)) / (2.0 * h)
        fine = (along(x0[k] + h / 2.0) - along(x0[k] - h / 2.0)) / h
        richardson = (4.0 * fine - coarse) / 3.0
        # compare where the derivative carries weight; far tails are
        # roundoff-dominated in any finite-difference scheme
        big = np.abs(richardson) > 1e-3 * np.abs(richardson).max()
        rel = np.abs(jac[big, k] - richardson[big]) / np.abs(richardson[big])
        assert rel.max() <= 1e-6


def test_singular_jacobian_names_the_degenerate_pair():
    data = np.linspace(0.0, 1.0, 20)

    def residual(params):
        # 'a' and 'b' enter only through their sum: an exactly flat direction
        return (params["a"] + params["b"]) * np.ones(20) - data

    with pytest.raises(SingularJacobianError) as err:
        _run_named_fit(
            residual,
            ("a", "b"),
            {"a": 0.3, "b": 0.1},
            {"a": 1.0, "b": 1.0},
            {},
            {},
            strict_singular=True,
        )
    assert set(err.value.parameters) == {"a", "b"}


# ---------------------------------------------------------------------------
# synthetic generator
# ---------------------------------------------------------------------------


def test_generator_noiseless_is_bit_identical():
    a = generate_synthetic_trace(TRUE_TRACE, GRID)
    b = generate_synthetic_trace(TRUE_TRACE, GRID)
    assert np.array_equal(a.amplitude_db, b.amplitude_db)
    assert np.array_equal(a.phase_rad, b.phase_rad)


def test_generator_seed_reproducible_and_distinct():
    a = generate_synthetic_trace(TRUE_TRACE, GRID, noise=GaussianNoise(0.02, 0.02), seed=5)
    b = generate_synthetic_trace(TRUE_TRACE, GRID, noise=GaussianNoise(0.02, 0.02), seed=5)
    c = generate_synthetic_trace(TRUE_TRACE, GRID, noise=GaussianNoise(0.02, 0.02), seed=6)
    assert np.array_equal(a.amplitude_db, b.amplitude_db)
    assert np.array_equal(a.phase_rad, b.phase_rad)
    assert not np.array_equal(a.amplitude_db, c.amplitude_db)


def test_generator_noise_vanishes_in_sigma_to_zero_limit():
    clean = generate_synthetic_trace(TRUE_TRACE, GRID)
    for sigma in (1e-3, 1e-6, 1e-9):
        noisy = generate_synthetic_trace(
            TRUE_TRACE, GRID, noise=GaussianNoise(sigma, sigma), seed=3
        )
        assert np.abs(noisy.amplitude_db - clean.amplitude_db).max() <= 40.0 * sigma
        assert np.abs(noisy.phase_rad - clean.phase_rad).max() <= 8.0 * sigma


# ---------------------------------------------------------------------------
# trace fit
# ---------------------------------------------------------------------------


def test_initial_guess_lands_in_the_basin():
    trace = generate_synthetic_trace(TRUE_TRACE, GRID)
    guess = initial_guess_from_trace(trace)
    for key in ("gamma_opt", "gamma_hf", "omega_c", "alpha0l"):
        assert 0.3 * TRUE_TRACE[key] <= guess[key] <= 3.0 * TRUE_TRACE[key]
    assert abs(guess["probe_center"]) <= 5e6
    assert abs(guess["aux_center"] - TRUE_TRACE["aux_center"]) <= 10e6


def test_noiseless_trace_recovers_parameters_exactly():
    trace = generate_synthetic_trace(TRUE_TRACE, GRID)
    result = fit_eit_trace(trace)
    assert result.converged
    for key in ("gamma_opt", "gamma_hf", "omega_c"):
        assert abs(result.parameters[key] / TRUE_TRACE[key] - 1.0) <= 1e-6
    assert result.residual_norm <= 1e-9
    assert not result.degenerate


def test_noisy_trace_median_recovery_within_ten_percent():
    # smaller seed count here; the acceptance suite runs the full fifty
    recovered = {k: [] for k in ("gamma_opt", "gamma_hf", "omega_c")}
    for seed in range(15):
        trace = generate_synthetic_trace(
            TRUE_TRACE, GRID, noise=GaussianNoise(0.02, 0.02), seed=seed
        )
        result = fit_eit_trace(trace)
        assert result.converged
        for key in recovered:
            recovered[key].append(result.parameters[key])
    for key, values in recovered.items():
        assert abs(np.median(values) / TRUE_TRACE[key] - 1.0) <= 0.10


def test_fit_round_trip_reproduces_trace_within_noise():
    noise = GaussianNoise(0.02, 0.02)
    trace = generate_synthetic_trace(TRUE_TRACE, GRID, noise=noise, seed=11)
    result = fit_eit_trace(trace)
    amp_fit, phase_fit = eit_trace_model(GRID, result.parameters)
    clean = generate_synthetic_trace(TRUE_TRACE, GRID)
    # the refit model hugs the underlying noiseless trace, not the noise
    amp_scatter = np.std(trace.amplitude_db - clean.amplitude_db)
    assert np.std(amp_fit - clean.amplitude_db) <= 0.5 * amp_scatter
    phase_scatter = np.std(trace.phase_rad - clean.phase_rad)
    assert np.std(phase_fit - clean.phase_rad) <= 0.5 * phase_scatter


def test_fit_rejects_unknown_init_keys_and_bad_bounds():
    trace = generate_synthetic_trace(TRUE_TRACE, GRID)
    with pytest.raises(InvalidParameterError):
        fit_eit_trace(trace, init={"not_a_parameter": 1.0})
    with pytest.raises(InvalidParameterError):
        fit_eit_trace(trace, init={"omega_c": mhz_to_angular(15.0)}, bounds={"omega_c": (0.0, 1.0)})


def test_published_regime_visibility_round_trip():
    # visibility through the width/coupling algebra survives the fit
    from erlyf import eit_visibility

    params = dict(TRUE_TRACE)
    params["gamma_opt"] = mhz_to_angular(35.0)
    trace = generate_synthetic_trace(params, GRID, noise=GaussianNoise(0.02, 0.02), seed=2)
    result = fit_eit_trace(trace)
    vis_true = eit_visibility(params["gamma_opt"], params["gamma_hf"], params["omega_c"])
    vis_fit = eit_visibility(
        result.parameters["gamma_opt"],
        result.parameters["gamma_hf"],
        result.parameters["omega_c"],
    )
    assert abs(vis_fit - vis_true) <= 0.05


# ---------------------------------------------------------------------------
# series fits
# ---------------------------------------------------------------------------


def published_nqp():
    return NqpParams(
        omega_spin=kelvin_to_angular(0.05),
        gamma_hf0=mhz_to_angular(6.4),
        gamma_nqp=2.0e-3,
        t_min=0.5,
    )


def test_temperature_series_exact_recovery():
    p = published_nqp()
    temps = np.linspace(0.1, 1.0, 10)
    clean = gamma_hf_vs_temperature(p, temps)
    init = {"gamma_hf0": p.gamma_hf0, "gamma_nqp": p.gamma_nqp, "t_min": p.t_min}
    result = fit_temperature_series(temps, clean, init=init)
    assert result.converged
    assert abs(result.parameters["gamma_hf0"] / p.gamma_hf0 - 1.0) <= 1e-6
    assert abs(result.parameters["gamma_nqp"] / p.gamma_nqp - 1.0) <= 1e-6
    assert abs(result.parameters["t_min"] / p.t_min - 1.0) <= 1e-6


def test_temperature_series_noisy_medians_within_twenty_percent():
    p = published_nqp()
    temps = np.linspace(0.1, 1.0, 10)
    clean = gamma_hf_vs_temperature(p, temps)
    truth = {"gamma_hf0": p.gamma_hf0, "gamma_nqp": p.gamma_nqp, "t_min": p.t_min}
    recovered = {k: [] for k in truth}
    for seed in range(15):
        rng = np.random.default_rng(seed)
        noisy = clean * (1.0 + 0.05 * rng.standard_normal(temps.size))
        result = fit_temperature_series(temps, noisy, init=dict(truth))
        for key in recovered:
            recovered[key].append(result.parameters[key])
    for key, values in recovered.items():
        assert abs(np.median(values) / truth[key] - 1.0) <= 0.20


def test_flat_temperature_series_reports_degeneracy():
    temps = np.linspace(0.1, 1.0, 10)
    flat = np.full(temps.size, mhz_to_angular(6.4))
    result = fit_temperature_series(
        temps, flat, init={"gamma_hf0": mhz_to_angular(6.4), "gamma_nqp": 0.0, "t_min": 0.4}
    )
    assert "t_min" in result.degenerate
    assert np.isnan(result.standard_errors["t_min"])
    # the flat direction gets no invented value confidence
    assert abs(result.parameters["gamma_nqp"]) <= 1e-6


def test_field_series_exact_and_noisy_recovery():
    s2 = mhz_per_mt2_to_si(0.91)
    model = SpinWidthModel(
        gamma_hf0=mhz_to_angular(4.5), delta_b_noise=mt_to_tesla(0.4), s2=s2
    )
    dbs = mt_to_tesla(np.linspace(-6.0, 6.0, 13))
    clean = spin_linewidth(model, dbs)
    result = fit_field_series(dbs, clean, s2)
    assert abs(result.parameters["gamma_hf0"] / model.gamma_hf0 - 1.0) <= 1e-9
    assert abs(result.parameters["delta_b_noise"] / model.delta_b_noise - 1.0) <= 1e-7

    rec_g, rec_db = [], []
    for seed in range(15):
        rng = np.random.default_rng(seed)
        noisy = clean * (1.0 + 0.05 * rng.standard_normal(dbs.size))
        r = fit_field_series(dbs, noisy, s2)
        rec_g.append(r.parameters["gamma_hf0"])
        rec_db.append(r.parameters["delta_b_noise"])
    assert abs(np.median(rec_g) / model.gamma_hf0 - 1.0) <= 0.10
    assert abs(np.median(rec_db) / model.delta_b_noise - 1.0) <= 0.25


def test_series_fit_input_validation():
    with pytest.raises(InvalidParameterError):
        fit_temperature_series([0.1, 0.2], [1.0, 2.0])
    with pytest.raises(InvalidParameterError):
        fit_field_series([0.0], [1.0], s2=1.0)

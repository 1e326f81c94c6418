"""One-shot verification of the headline numbers against the bundled
configuration: clock-point location and curvature, Lambda symmetry,
polariton figures, window width and visibility algebra, thermal model,
fit round trips and readout-oracle equivalence.

Each check returns a row for the pass/fail table the ``reproduce``
subcommand prints.
"""

from __future__ import annotations

import time
from dataclasses import dataclass

import numpy as np

from .config import CrystalConfig, default_config
from .eit import (
    collective_coupling,
    eit_visibility,
    eit_width,
    group_delay,
    group_delay_from_phase,
    ovna_amplitude,
    ovna_phase,
    susceptibility,
)
from .fitting import (
    GaussianNoise,
    fit_eit_trace,
    fit_field_series,
    fit_temperature_series,
    generate_synthetic_trace,
)
from .spin import FieldVector, diagonalize
from .thermal import gamma_hf_vs_temperature
from .transitions import (
    optical_amplitudes,
    pair_indices_by_character,
    refine_symmetric_field,
    spin_linewidth,
    zefoz_search,
)
from .units import (
    angular_to_mhz,
    mhz_to_angular,
    mt_to_tesla,
    s_to_ns,
    si_to_mhz_per_mt2,
    tesla_to_mt,
)


@dataclass(frozen=True)
class CheckResult:
    index: int
    name: str
    passed: bool
    detail: str
    seconds: float = 0.0


def _timed(index, name, fn):
    start = time.perf_counter()
    try:
        passed, detail = fn()
    except Exception as exc:  # a crashed check is a failed check, with its reason
        passed, detail = False, f"raised {type(exc).__name__}: {exc}"
    return CheckResult(index, name, passed, detail, time.perf_counter() - start)


def _zefoz_report(config: CrystalConfig):
    ground = config.ground_params()
    seed = FieldVector.longitudinal(config.zefoz_seed_tesla())
    g, s = pair_indices_by_character(diagonalize(ground, seed))
    zcfg = config.values["zefoz"]
    return zefoz_search(
        ground,
        g,
        s,
        seed,
        fd_step=mt_to_tesla(zcfg["fd_step_mT"]),
        grad_tol=zcfg["grad_tol_rad_per_s_per_T"],
        max_iter=zcfg["max_iter"],
    )


def check_zefoz_location(config: CrystalConfig) -> CheckResult:
    def run():
        report = _zefoz_report(config)
        b_mt = tesla_to_mt(report.field.bz)
        return abs(b_mt - 20.0) <= 2.0, f"clock field {b_mt:.3f} mT (target 20 +- 2 mT)"

    return _timed(1, "clock-point location", run)


def check_zefoz_curvature(config: CrystalConfig) -> CheckResult:
    def run():
        report = _zefoz_report(config)
        s2 = si_to_mhz_per_mt2(report.s2[2])
        return abs(s2 / 0.91 - 1.0) <= 0.25, f"S2 = {s2:.4f} MHz/mT^2 (target 0.91 +- 25%)"

    return _timed(2, "clock-point curvature", run)


def check_lambda_symmetry(config: CrystalConfig) -> CheckResult:
    def run():
        ground = config.ground_params()
        excited = config.excited_params()
        report = _zefoz_report(config)
        g_levels = diagonalize(ground, report.field)
        g, s = pair_indices_by_character(g_levels)
        e_levels = diagonalize(excited, report.field)
        row = e_levels.basis.index((0.5, excited.spin_i))
        e = int(np.argmax(np.abs(e_levels.states[row, :])))
        field = refine_symmetric_field(ground, excited, g, s, e, report.field)
        amps = optical_amplitudes(diagonalize(ground, field), diagonalize(excited, field))
        legs = amps[:, e]
        asym = abs(legs[g] - legs[s]) / (legs[g] + legs[s])
        competing = np.delete(legs, [g, s]).max()
        ratio = competing / min(legs[g], legs[s])
        ok = asym < 1e-10 and ratio <= 0.01
        return ok, f"asymmetry {asym:.2e} (< 1e-10), competing/leg {ratio:.2e} (<= 0.01)"

    return _timed(3, "Lambda-leg symmetry and isolation", run)


def check_collective_coupling(config: CrystalConfig) -> CheckResult:
    def run():
        g_mhz = angular_to_mhz(collective_coupling(config.polariton_params()))
        return abs(g_mhz / 270.0 - 1.0) <= 0.02, f"g sqrt(N) = {g_mhz:.2f} MHz (target 270 +- 2%)"

    return _timed(4, "collective coupling", run)


def check_eit_width(config: CrystalConfig) -> CheckResult:
    def run():
        sec = config.values["eit"]
        width = eit_width(
            mhz_to_angular(sec["gamma_opt_MHz"]),
            mhz_to_angular(sec["gamma_hf_MHz"]),
            mhz_to_angular(sec["omega_c_MHz"]),
        )
        width_mhz = angular_to_mhz(width)
        ok = abs(width_mhz - 11.2) <= 0.05 and abs(width_mhz / 12.0 - 1.0) <= 0.10
        return ok, f"window width {width_mhz:.3f} MHz (11.2 expected, within 10% of 12)"

    return _timed(5, "transparency window width", run)


def check_visibility_algebra(config: CrystalConfig) -> CheckResult:
    def run():
        gamma_opt = mhz_to_angular(config.values["eit"]["gamma_opt_MHz"])
        gamma_hf = mhz_to_angular(config.values["eit"]["gamma_hf_MHz"])
        omega_c = np.sqrt(gamma_opt * gamma_hf)
        vis = eit_visibility(gamma_opt, gamma_hf, omega_c)
        return abs(vis - 0.5) <= 1e-12, f"visibility at matched coupling = {vis!r} (0.5 exact)"

    return _timed(6, "visibility midpoint algebra", run)


def check_group_delay(config: CrystalConfig) -> CheckResult:
    def run():
        sec = config.values["eit"]
        gamma_opt = mhz_to_angular(sec["gamma_opt_MHz"])
        gamma_hf = mhz_to_angular(sec["gamma_hf_MHz"])
        tau_poly = group_delay(config.polariton_params(), gamma_opt, gamma_hf)
        tau_ns = s_to_ns(tau_poly)
        params = config.trace_model_params()
        params["aux_depth"] = 0.0
        grid = np.linspace(-100e6, 100e6, 4001)
        trace = generate_synthetic_trace(params, grid)
        delay = group_delay_from_phase(trace)
        window = angular_to_mhz(eit_width(gamma_opt, gamma_hf, params["omega_c"])) * 1e6
        inside = np.abs(grid) <= window
        peak = float(delay[inside].max())
        ok = 5.0 <= tau_ns <= 9.0 and abs(peak / tau_poly - 1.0) <= 0.20
        return ok, (
            f"polariton delay {tau_ns:.2f} ns (in [5, 9]); "
            f"trace delay peak {s_to_ns(peak):.2f} ns ({peak / tau_poly:.3f} of polariton)"
        )

    return _timed(7, "group delay consistency", run)


def check_thermal_model(config: CrystalConfig) -> CheckResult:
    def run():
        p = config.nqp_params()
        g1 = angular_to_mhz(gamma_hf_vs_temperature(p, 1.0))
        grid = np.linspace(0.1, 0.4, 31)
        g = gamma_hf_vs_temperature(p, grid)
        variation = float(np.max(np.abs(g - g.mean())) / g.mean())
        ok = abs(g1 / 10.3 - 1.0) <= 0.05 and variation < 0.05
        return ok, (
            f"Gamma_HF(1 K) = {g1:.3f} MHz (10.3 +- 5%); "
            f"variation about the mean on [0.1, 0.4] K = {variation * 100:.2f}% (< 5%)"
        )

    return _timed(8, "thermal broadening model", run)


def check_fit_round_trips(config: CrystalConfig, seeds: int = 50) -> CheckResult:
    def run():
        details = []
        ok = True

        # Trace fit: 2% noise, median recovered parameters within 10%.
        truth = config.trace_model_params()
        grid = np.linspace(-150e6, 150e6, 601)
        noise = GaussianNoise(sigma_amp=0.02, sigma_phase=0.02)
        recovered = {k: [] for k in ("gamma_opt", "gamma_hf", "omega_c")}
        for seed in range(seeds):
            trace = generate_synthetic_trace(truth, grid, noise=noise, seed=seed)
            result = fit_eit_trace(trace)
            for key in recovered:
                recovered[key].append(result.parameters[key])
        worst = 0.0
        for key, values in recovered.items():
            err = abs(float(np.median(values)) / truth[key] - 1.0)
            worst = max(worst, err)
            ok = ok and err <= 0.10
        details.append(f"trace fit worst median error {worst * 100:.2f}% (<= 10%)")

        # Temperature series: 5% noise on 10 points, medians within 20%.
        p = config.nqp_params()
        t_truth = {"gamma_hf0": p.gamma_hf0, "gamma_nqp": p.gamma_nqp, "t_min": p.t_min}
        temps = np.linspace(0.1, 1.0, 10)
        clean = gamma_hf_vs_temperature(p, temps)
        recovered = {k: [] for k in t_truth}
        for seed in range(seeds):
            rng = np.random.default_rng(seed)
            noisy = clean * (1.0 + 0.05 * rng.standard_normal(temps.size))
            result = fit_temperature_series(
                temps,
                noisy,
                init=dict(t_truth),
                hbar_omega_over_kb=config.values["thermal"]["hbar_omega_over_kb_K"],
            )
            for key in recovered:
                recovered[key].append(result.parameters[key])
        worst = 0.0
        for key, values in recovered.items():
            err = abs(float(np.median(values)) / t_truth[key] - 1.0)
            worst = max(worst, err)
            ok = ok and err <= 0.20
        details.append(f"temperature fit worst median error {worst * 100:.2f}% (<= 20%)")

        # Field series: 5% noise, Gamma_HF0 within 10%, noise amplitude within 25%.
        model = config.spin_width_model()
        dbs = mt_to_tesla(np.linspace(-6.0, 6.0, 13))
        clean = spin_linewidth(model, dbs)
        rec_g, rec_db = [], []
        for seed in range(seeds):
            rng = np.random.default_rng(seed)
            noisy = clean * (1.0 + 0.05 * rng.standard_normal(dbs.size))
            result = fit_field_series(
                dbs,
                noisy,
                s2=model.s2,
                init={"gamma_hf0": model.gamma_hf0, "delta_b_noise": model.delta_b_noise},
            )
            rec_g.append(result.parameters["gamma_hf0"])
            rec_db.append(result.parameters["delta_b_noise"])
        err_g = abs(float(np.median(rec_g)) / model.gamma_hf0 - 1.0)
        err_db = abs(float(np.median(rec_db)) / model.delta_b_noise - 1.0)
        ok = ok and err_g <= 0.10 and err_db <= 0.25
        details.append(
            f"field fit errors {err_g * 100:.2f}% / {err_db * 100:.2f}% (<= 10% / 25%)"
        )
        return ok, "; ".join(details)

    return _timed(9, "fit round trips", run)


def _chi_reference(gamma_opt, gamma_hf, omega_c, scale, dge, dse):
    """Susceptibility via explicit real/imaginary arithmetic (oracle twin)."""
    gge = 0.5 * gamma_opt
    gsg = 0.5 * gamma_hf
    d2 = dge - dse
    n_re = -scale * gge * d2
    n_im = scale * gge * gsg
    d_re = gge * gsg - dge * d2 + 0.25 * omega_c * omega_c
    d_im = gge * d2 + dge * gsg
    den = d_re * d_re + d_im * d_im
    return (n_re * d_re + n_im * d_im) / den, (n_im * d_re - n_re * d_im) / den


def check_oracle_equivalence(config: CrystalConfig, npoints: int = 10_000) -> CheckResult:
    def run():
        from .eit import EitLineParams

        rng = np.random.default_rng(20260809)
        worst = 0.0
        gamma_opt = mhz_to_angular(rng.uniform(1.0, 100.0, npoints))
        gamma_hf = mhz_to_angular(rng.uniform(0.1, 20.0, npoints))
        omega_c = mhz_to_angular(rng.uniform(0.0, 50.0, npoints))
        scale = rng.uniform(0.05, 3.0, npoints)
        dge = mhz_to_angular(rng.uniform(-200.0, 200.0, npoints))
        dse = mhz_to_angular(rng.uniform(-20.0, 20.0, npoints))
        for k in range(npoints):
            line = EitLineParams.from_fwhm(gamma_opt[k], gamma_hf[k], omega_c[k], scale[k])
            chi = susceptibility(line, dge[k], dse[k])
            re_ref, im_ref = _chi_reference(
                gamma_opt[k], gamma_hf[k], omega_c[k], scale[k], dge[k], dse[k]
            )
            chi_ref = complex(re_ref, im_ref)
            worst = max(worst, abs(chi - chi_ref) / abs(chi_ref))
            amp_ref = (1.0 + im_ref * (im_ref + 2.0 * np.cos(re_ref) ** 2)) ** 0.5
            phase_ref = -(im_ref * np.sin(re_ref)) / (1.0 + im_ref * np.cos(re_ref))
            worst = max(worst, abs(ovna_amplitude(chi) - amp_ref) / abs(amp_ref))
            phase = ovna_phase(chi)
            if abs(phase_ref) > 1e-300:
                worst = max(worst, abs(phase - phase_ref) / abs(phase_ref))
        return worst <= 1e-12, f"worst relative deviation {worst:.3e} (<= 1e-12, {npoints} points)"

    return _timed(10, "readout oracle equivalence", run)


def run_all(config: CrystalConfig | None = None) -> list[CheckResult]:
    config = config or default_config()
    return [
        check_zefoz_location(config),
        check_zefoz_curvature(config),
        check_lambda_symmetry(config),
        check_collective_coupling(config),
        check_eit_width(config),
        check_visibility_algebra(config),
        check_group_delay(config),
        check_thermal_model(config),
        check_fit_round_trips(config),
        check_oracle_equivalence(config),
    ]


def format_table(results: list[CheckResult]) -> str:
    lines = []
    width = max(len(r.name) for r in results)
    for r in results:
        flag = "PASS" if r.passed else "FAIL"
        lines.append(f"{r.index:>2}  {r.name:<{width}}  {flag}  [{r.seconds:6.2f} s]  {r.detail}")
    n_pass = sum(r.passed for r in results)
    total = sum(r.seconds for r in results)
    lines.append(f"{n_pass}/{len(results)} checks passed in {total:.1f} s")
    return "\n".join(lines)

"""Command-line front end.

Subcommands: levels, zefoz, eit, fit, sweep, generate, reproduce.  Flags
override configuration-file keys, which override the built-in defaults.
Exit codes: 0 success, 2 configuration/usage error, 3 numerical failure,
4 I/O failure.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

import numpy as np

from . import plotting
from .config import CrystalConfig, bundled_config_path, load_config, parse_init_file
from .eit import eit_visibility, eit_width, group_delay, group_delay_from_phase
from .errors import (
    ConfigError,
    ContractViolationError,
    ErlyfError,
    InvalidParameterError,
    PhaseSingularityError,
    SearchFailedError,
    SingularJacobianError,
    TraceFormatError,
)
from .fitting import (
    GaussianNoise,
    eit_trace_model,
    fit_eit_trace,
    fit_field_series,
    fit_temperature_series,
    generate_synthetic_trace,
)
from .reproduce import format_table, run_all
from .spin import FieldVector, boltzmann_populations, diagonalize, sweep_levels
from .thermal import effective_temperature, gamma_hf_vs_temperature
from .traceio import read_table, read_trace, write_fit_csv, write_fit_report, write_table, write_trace
from .transitions import (
    SpinWidthModel,
    find_lambda_systems,
    pair_indices_by_character,
    spin_linewidth,
    zefoz_search,
)
from .units import (
    angular_to_ghz,
    angular_to_mhz,
    mhz_to_angular,
    mt_to_tesla,
    s_to_ns,
    si_to_mhz_per_mt,
    si_to_mhz_per_mt2,
    tesla_to_mt,
)

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NUMERIC = 3
EXIT_IO = 4

SWEEP_VARIABLES = ("field_longitudinal", "field_transverse", "temperature", "couple_detuning")


def _load(args) -> CrystalConfig:
    return load_config(args.config)


def _maybe(value, fallback):
    return fallback if value is None else value


def _plot_path(out_path) -> Path:
    return Path(out_path).with_suffix(".png")


# ---------------------------------------------------------------------------
# levels
# ---------------------------------------------------------------------------


def cmd_levels(args) -> int:
    config = _load(args)
    grids = config.values["grids"]
    manifold = config.ground_params() if args.manifold == "ground" else config.excited_params()
    b_min = _maybe(args.b_min_mt, grids["levels_b_min_mT"])
    b_max = _maybe(args.b_max_mt, grids["levels_b_max_mT"])
    points = _maybe(args.points, grids["levels_points"])
    sweep = sweep_levels(
        manifold,
        FieldVector.longitudinal(1.0),
        (mt_to_tesla(b_min), mt_to_tesla(b_max)),
        points,
    )
    fields_mt = tesla_to_mt(sweep.fields)
    branches_ghz = angular_to_ghz(sweep.branches)
    header = ["field_mT"] + [f"branch_{k:02d}_GHz" for k in range(branches_ghz.shape[0])]
    write_table(args.out, header, [fields_mt] + list(branches_ghz))
    if args.plot:
        plotting.save_levels_figure(
            fields_mt, branches_ghz, _plot_path(args.out), title=f"{args.manifold} manifold"
        )
    print(f"wrote {branches_ghz.shape[0]} branches x {points} points to {args.out}")
    return EXIT_OK


# ---------------------------------------------------------------------------
# zefoz
# ---------------------------------------------------------------------------


def cmd_zefoz(args) -> int:
    config = _load(args)
    ground = config.ground_params()
    excited = config.excited_params()
    zcfg = config.values["zefoz"]
    seed = FieldVector.longitudinal(mt_to_tesla(_maybe(args.seed_mt, zcfg["seed_mT"])))
    seed_levels = diagonalize(ground, seed)
    if args.g_index is not None and args.s_index is not None:
        g, s = args.g_index, args.s_index
    else:
        g, s = pair_indices_by_character(seed_levels)
    report = zefoz_search(
        ground,
        g,
        s,
        seed,
        search_axes=tuple(args.axes),
        fd_step=mt_to_tesla(zcfg["fd_step_mT"]),
        grad_tol=zcfg["grad_tol_rad_per_s_per_T"],
        max_iter=_maybe(args.max_iter, zcfg["max_iter"]),
    )

    b_mt = tesla_to_mt(report.field.bz)
    rows = {
        "B_zefoz_mT": b_mt,
        "spin_frequency_GHz": angular_to_ghz(report.spin_frequency),
        "S1_x_MHz_per_mT": si_to_mhz_per_mt(report.s1[0]),
        "S1_y_MHz_per_mT": si_to_mhz_per_mt(report.s1[1]),
        "S1_z_MHz_per_mT": si_to_mhz_per_mt(report.s1[2]),
        "S2_x_MHz_per_mT2": si_to_mhz_per_mt2(report.s2[0]),
        "S2_y_MHz_per_mT2": si_to_mhz_per_mt2(report.s2[1]),
        "S2_z_MHz_per_mT2": si_to_mhz_per_mt2(report.s2[2]),
        "iterations": report.iterations,
    }
    write_table(args.out, list(rows), [[v] for v in rows.values()])

    width = max(len(k) for k in rows)
    print("clock-point search report")
    for key, value in rows.items():
        print(f"  {key:<{width}}  {value:.9g}")

    # Lambda triples at the clock point, most symmetric first.
    g_levels = diagonalize(ground, report.field)
    e_levels = diagonalize(excited, report.field)
    pops = boltzmann_populations(g_levels, config.values["lambda"]["temperature_K"])
    lams = find_lambda_systems(
        g_levels,
        e_levels,
        pops,
        asymmetry_tol=config.values["lambda"]["asymmetry_tol"],
        isolation_tol=config.values["lambda"]["isolation_tol"],
    )
    if lams:
        lambda_path = Path(args.out).with_name(Path(args.out).stem + "_lambda.csv")
        write_table(
            lambda_path,
            ["g_index", "s_index", "e_index", "probe_GHz", "couple_GHz", "spin_GHz", "asymmetry"],
            [
                [lam.g_index for lam in lams],
                [lam.s_index for lam in lams],
                [lam.e_index for lam in lams],
                [angular_to_ghz(lam.probe_frequency) for lam in lams],
                [angular_to_ghz(lam.couple_frequency) for lam in lams],
                [angular_to_ghz(lam.spin_frequency) for lam in lams],
                [lam.amplitude_asymmetry for lam in lams],
            ],
        )
        print(f"Lambda systems (most symmetric first, full list in {lambda_path}):")
        print("  (g, s, e, probe GHz, couple GHz, spin GHz, asymmetry)")
        for lam in lams[:5]:
            print(
                f"  ({lam.g_index}, {lam.s_index}, {lam.e_index}, "
                f"{angular_to_ghz(lam.probe_frequency):.6f}, "
                f"{angular_to_ghz(lam.couple_frequency):.6f}, "
                f"{angular_to_ghz(lam.spin_frequency):.6f}, "
                f"{lam.amplitude_asymmetry:.3e})"
            )
    return EXIT_OK


# ---------------------------------------------------------------------------
# eit / generate
# ---------------------------------------------------------------------------


def _trace_grid(args, config):
    grids = config.values["grids"]
    span_mhz = _maybe(args.span_mhz, grids["eit_span_MHz"])
    points = _maybe(args.points, grids["eit_points"])
    if points < 8:
        raise InvalidParameterError("a trace needs at least 8 points")
    return np.linspace(-span_mhz * 1e6, span_mhz * 1e6, points)


def cmd_eit(args) -> int:
    config = _load(args)
    params = config.trace_model_params()
    grid = _trace_grid(args, config)
    trace = generate_synthetic_trace(params, grid)
    delay = group_delay_from_phase(trace)
    write_trace(args.out, trace, delay_s=delay)
    if args.plot:
        plotting.save_trace_figure(
            grid * 1e-6, trace.amplitude_db, trace.phase_rad, s_to_ns(delay), _plot_path(args.out)
        )
    print(f"wrote EIT trace ({trace.npoints} points) to {args.out}")
    return EXIT_OK


def cmd_generate(args) -> int:
    config = _load(args)
    params = config.trace_model_params()
    noise_cfg = config.values["noise"]
    grid = _trace_grid(args, config)
    sigma_amp = _maybe(args.noise_amp, noise_cfg["sigma_amp"])
    sigma_phase = _maybe(args.noise_phase, noise_cfg["sigma_phase_rad"])
    seed = _maybe(args.seed, noise_cfg["seed"])
    noise = None
    if sigma_amp > 0.0 or sigma_phase > 0.0:
        noise = GaussianNoise(sigma_amp=sigma_amp, sigma_phase=sigma_phase)
    trace = generate_synthetic_trace(params, grid, noise=noise, seed=seed)
    write_trace(args.out, trace)
    if args.plot:
        plotting.save_trace_figure(
            grid * 1e-6, trace.amplitude_db, trace.phase_rad, None, _plot_path(args.out)
        )
    print(f"wrote synthetic trace ({trace.npoints} points, seed {seed}) to {args.out}")
    return EXIT_OK


# ---------------------------------------------------------------------------
# fit
# ---------------------------------------------------------------------------


def _column(header, rows, name, path):
    for k, h in enumerate(header):
        if h.lower() == name.lower():
            return rows[:, k]
    raise TraceFormatError(f"{path}: required column {name!r} not found in {header}")


def cmd_fit(args) -> int:
    config = _load(args)
    init = parse_init_file(args.init) if args.init else None
    out_csv = Path(args.out)
    out_txt = out_csv.with_suffix(".txt")

    if args.model == "eit":
        trace = read_trace(args.data)
        result = fit_eit_trace(trace, init=init)
        extras = {
            "gamma_opt_MHz": angular_to_mhz(result.parameters["gamma_opt"]),
            "gamma_hf_MHz": angular_to_mhz(result.parameters["gamma_hf"]),
            "omega_c_MHz": angular_to_mhz(result.parameters["omega_c"]),
            "visibility": eit_visibility(
                result.parameters["gamma_opt"],
                result.parameters["gamma_hf"],
                result.parameters["omega_c"],
            ),
        }
        if args.plot:
            amp_model, phase_model = eit_trace_model(trace.frequency, result.parameters)
            plotting.save_fit_figure(trace, amp_model, phase_model, _plot_path(args.out))
    elif args.model == "temperature":
        header, rows = read_table(args.data)
        temps = _column(header, rows, "T_K", args.data)
        gammas = mhz_to_angular(_column(header, rows, "gamma_hf_MHz", args.data))
        result = fit_temperature_series(
            temps,
            gammas,
            init=init,
            hbar_omega_over_kb=config.values["thermal"]["hbar_omega_over_kb_K"],
        )
        extras = {"gamma_hf0_MHz": angular_to_mhz(result.parameters["gamma_hf0"])}
    elif args.model == "field":
        header, rows = read_table(args.data)
        dbs = mt_to_tesla(_column(header, rows, "delta_b_mT", args.data))
        gammas = mhz_to_angular(_column(header, rows, "gamma_hf_MHz", args.data))
        result = fit_field_series(dbs, gammas, s2=config.spin_width_model().s2, init=init)
        extras = {
            "gamma_hf0_MHz": angular_to_mhz(result.parameters["gamma_hf0"]),
            "delta_b_noise_mT": tesla_to_mt(result.parameters["delta_b_noise"]),
        }
    else:  # pragma: no cover - argparse restricts choices
        raise InvalidParameterError(f"unknown fit model {args.model!r}")

    extras["residual_norm"] = result.residual_norm
    extras["iterations"] = result.iterations
    extras["converged"] = result.converged
    write_fit_csv(out_csv, result.parameters, result.standard_errors)
    write_fit_report(out_txt, result.parameters, result.standard_errors, extras)
    for key, value in extras.items():
        print(f"{key} = {value}")
    if result.degenerate:
        print(f"unidentifiable parameters: {', '.join(result.degenerate)}")
    if not result.converged:
        print("fit did not converge", file=sys.stderr)
        return EXIT_NUMERIC
    print(f"wrote fit report to {out_csv} and {out_txt}")
    return EXIT_OK


# ---------------------------------------------------------------------------
# sweep
# ---------------------------------------------------------------------------


def _derived_outputs(config, gamma_hf):
    """Window width, visibility and polariton delay for a spin width value."""
    sec = config.values["eit"]
    gamma_opt = mhz_to_angular(sec["gamma_opt_MHz"])
    omega_c = mhz_to_angular(sec["omega_c_MHz"])
    return {
        "gamma_eit_MHz": angular_to_mhz(eit_width(gamma_opt, gamma_hf, omega_c)),
        "visibility": eit_visibility(gamma_opt, gamma_hf, omega_c),
        "delay_ns": s_to_ns(group_delay(config.polariton_params(), gamma_opt, gamma_hf)),
    }


def cmd_sweep(args) -> int:
    config = _load(args)
    if args.points < 2:
        raise InvalidParameterError("sweep needs at least 2 points")
    if args.start >= args.stop:
        raise InvalidParameterError("sweep range must be non-degenerate (start < stop)")
    x = np.linspace(args.start, args.stop, args.points)

    if args.variable == "temperature":
        p = config.nqp_params()
        columns: dict[str, list[float]] = {
            "T_K": [],
            "T_eff_K": [],
            "gamma_hf_MHz": [],
            "visibility": [],
            "gamma_eit_MHz": [],
            "delay_ns": [],
        }
        for t in x:
            gamma_hf = gamma_hf_vs_temperature(p, t)
            derived = _derived_outputs(config, gamma_hf)
            columns["T_K"].append(t)
            columns["T_eff_K"].append(effective_temperature(t, p.t_min))
            columns["gamma_hf_MHz"].append(angular_to_mhz(gamma_hf))
            columns["visibility"].append(derived["visibility"])
            columns["gamma_eit_MHz"].append(derived["gamma_eit_MHz"])
            columns["delay_ns"].append(derived["delay_ns"])
        x_label = "T_K"
    elif args.variable in ("field_longitudinal", "field_transverse"):
        ground = config.ground_params()
        zcfg = config.values["zefoz"]
        seed = FieldVector.longitudinal(config.zefoz_seed_tesla())
        g, s = pair_indices_by_character(diagonalize(ground, seed))
        report = zefoz_search(
            ground, g, s, seed,
            fd_step=mt_to_tesla(zcfg["fd_step_mT"]),
            grad_tol=zcfg["grad_tol_rad_per_s_per_T"],
            max_iter=zcfg["max_iter"],
        )
        model = config.spin_width_model()
        if args.variable == "field_transverse":
            # Transverse sensitivity: |S2_x| of the clock pair drives Eq.-style
            # broadening for detunings perpendicular to the c axis.
            model = SpinWidthModel(
                gamma_hf0=model.gamma_hf0,
                delta_b_noise=model.delta_b_noise,
                s2=abs(float(report.s2[0])),
            )
            b_zefoz_mt = 0.0
            x_label = "B_perp_mT"
        else:
            b_zefoz_mt = tesla_to_mt(report.field.bz)
            x_label = "B_mT"
        columns = {x_label: [], "delta_b_mT": [], "gamma_hf_MHz": [],
                   "visibility": [], "gamma_eit_MHz": [], "delay_ns": []}
        for b in x:
            delta_b = mt_to_tesla(b - b_zefoz_mt)
            gamma_hf = spin_linewidth(model, delta_b)
            derived = _derived_outputs(config, gamma_hf)
            columns[x_label].append(b)
            columns["delta_b_mT"].append(b - b_zefoz_mt)
            columns["gamma_hf_MHz"].append(angular_to_mhz(gamma_hf))
            columns["visibility"].append(derived["visibility"])
            columns["gamma_eit_MHz"].append(derived["gamma_eit_MHz"])
            columns["delay_ns"].append(derived["delay_ns"])
    else:  # couple_detuning
        params = config.trace_model_params()
        grids = config.values["grids"]
        grid = np.linspace(
            -grids["eit_span_MHz"] * 1e6, grids["eit_span_MHz"] * 1e6, grids["eit_points"]
        )
        columns = {"couple_detuning_MHz": [], "dip_amplitude_dB": [], "delay_peak_ns": []}
        for det_mhz in x:
            p = dict(params)
            p["couple_detuning"] = mhz_to_angular(det_mhz)
            trace = generate_synthetic_trace(p, grid)
            delay = group_delay_from_phase(trace)
            two_photon = int(np.argmin(np.abs(grid - det_mhz * 1e6)))
            columns["couple_detuning_MHz"].append(det_mhz)
            columns["dip_amplitude_dB"].append(float(trace.amplitude_db[two_photon]))
            columns["delay_peak_ns"].append(float(s_to_ns(delay.max())))
        x_label = "couple_detuning_MHz"

    requested = args.outputs.split(",") if args.outputs is not None else None
    if requested is not None:
        requested = [r.strip() for r in requested if r.strip()]
        if not requested:
            raise InvalidParameterError("empty output request; name at least one column")
        unknown = [r for r in requested if r not in columns or r == x_label]
        if unknown:
            raise InvalidParameterError(
                f"unknown output column(s) {unknown}; available: "
                f"{[c for c in columns if c != x_label]}"
            )
        columns = {x_label: columns[x_label], **{r: columns[r] for r in requested}}

    write_table(args.out, list(columns), [np.asarray(v) for v in columns.values()])
    if args.plot:
        panels = {k: np.asarray(v) for k, v in columns.items() if k != x_label}
        plotting.save_sweep_figure(np.asarray(columns[x_label]), panels, x_label, _plot_path(args.out))
    print(f"wrote {args.variable} sweep ({args.points} points) to {args.out}")
    return EXIT_OK


# ---------------------------------------------------------------------------
# reproduce
# ---------------------------------------------------------------------------


def cmd_reproduce(args) -> int:
    config = _load(args)
    results = run_all(config)
    print(format_table(results))
    return EXIT_OK if all(r.passed for r in results) else EXIT_NUMERIC


# ---------------------------------------------------------------------------
# parser
# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="erlyf",
        description="Spin-level, clock-transition and EIT modelling for 167Er:LiYF4.",
        epilog=f"bundled example configuration: {bundled_config_path()}",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def add_common(p):
        p.add_argument("-c", "--config", default=None, help="configuration file (INI-style)")
        p.add_argument(
            "--plot", dest="plot", action="store_true", help="render a PNG next to the CSV (default)"
        )
        p.add_argument(
            "--no-plot", dest="plot", action="store_false", help="write the CSV only"
        )
        p.set_defaults(plot=True)

    p = sub.add_parser("levels", help="level diagram vs longitudinal field (CSV)")
    add_common(p)
    p.add_argument("--manifold", choices=("ground", "excited"), default="ground")
    p.add_argument("--b-min-mt", type=float, default=None)
    p.add_argument("--b-max-mt", type=float, default=None)
    p.add_argument("--points", type=int, default=None)
    p.add_argument("--out", default="levels.csv")
    p.set_defaults(func=cmd_levels)

    p = sub.add_parser("zefoz", help="locate the clock point and report S1/S2")
    add_common(p)
    p.add_argument("--seed-mt", type=float, default=None)
    p.add_argument("--g-index", type=int, default=None)
    p.add_argument("--s-index", type=int, default=None)
    p.add_argument("--axes", default="z", help="subset of xyz to search")
    p.add_argument("--max-iter", type=int, default=None)
    p.add_argument("--out", default="zefoz.csv")
    p.set_defaults(func=cmd_zefoz)

    p = sub.add_parser("eit", help="noiseless EIT trace with delay column (CSV)")
    add_common(p)
    p.add_argument("--span-mhz", type=float, default=None)
    p.add_argument("--points", type=int, default=None)
    p.add_argument("--out", default="trace.csv")
    p.set_defaults(func=cmd_eit)

    p = sub.add_parser("generate", help="synthetic noisy trace for fitting exercises")
    add_common(p)
    p.add_argument("--span-mhz", type=float, default=None)
    p.add_argument("--points", type=int, default=None)
    p.add_argument("--noise-amp", type=float, default=None, help="relative amplitude noise")
    p.add_argument("--noise-phase", type=float, default=None, help="phase noise (rad)")
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--out", default="synthetic.csv")
    p.set_defaults(func=cmd_generate)

    p = sub.add_parser("fit", help="least-squares parameter extraction")
    add_common(p)
    p.add_argument("--model", choices=("eit", "temperature", "field"), default="eit")
    p.add_argument("--data", required=True, help="input CSV (trace or series)")
    p.add_argument("--init", default=None, help="key = value file of initial guesses")
    p.add_argument("--out", default="fit.csv")
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("sweep", help="derived quantities vs field/temperature/detuning")
    add_common(p)
    p.add_argument("--variable", choices=SWEEP_VARIABLES, required=True)
    p.add_argument("--start", type=float, required=True, help="range start (mT, K or MHz)")
    p.add_argument("--stop", type=float, required=True, help="range stop (mT, K or MHz)")
    p.add_argument("--points", type=int, default=25)
    p.add_argument("--outputs", default=None, help="comma-separated output columns")
    p.add_argument("--out", default="sweep.csv")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("reproduce", help="run the built-in verification table")
    p.add_argument("-c", "--config", default=None)
    p.set_defaults(func=cmd_reproduce)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ConfigError, InvalidParameterError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except SearchFailedError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        if exc.best is not None:
            best = exc.best
            print(
                f"best iterate: B = {tesla_to_mt(best.field.bz):.4f} mT, "
                f"|grad| = {best.grad_norm:.3e} (rad/s)/T",
                file=sys.stderr,
            )
        return EXIT_NUMERIC
    except (SingularJacobianError, PhaseSingularityError, ContractViolationError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except TraceFormatError as exc:
        print(f"i/o failure: {exc}", file=sys.stderr)
        return EXIT_IO
    except OSError as exc:
        print(f"i/o failure: {exc}", file=sys.stderr)
        return EXIT_IO
    except ErlyfError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())

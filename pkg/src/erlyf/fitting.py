"""Levenberg-Marquardt extraction of line parameters from heterodyne traces
and from linewidth series.

The trace model is the heterodyne readout of the three-level susceptibility
plus one auxiliary two-level line (the weak neighbour that is always fitted
together with the transparency feature), with explicit gain and offset
nuisance parameters per channel.  Amplitude and phase residuals are fitted
jointly, balanced by their per-channel standard deviation unless an
explicit weight array is present.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .eit import EitLineParams, ovna_amplitude, ovna_phase, susceptibility
from .errors import InvalidParameterError, SingularJacobianError
from .thermal import NqpParams, gamma_hf_vs_temperature
from .traceio import OvnaTrace
from .transitions import SpinWidthModel, spin_linewidth
from .units import TWO_PI, kelvin_to_angular

# ---------------------------------------------------------------------------
# Levenberg-Marquardt core
# ---------------------------------------------------------------------------

#: Relative finite-difference step for Jacobians (central differences).
FD_REL_STEP = 1e-6

#: A parameter whose Jacobian column norm falls below this fraction of the
#: largest column is reported as unidentifiable.
DEGENERATE_COLUMN_RTOL = 1e-9


@dataclass(frozen=True)
class FitResult:
    """Outcome of one least-squares fit.

    ``parameters`` holds every model parameter (fitted and fixed);
    ``standard_errors`` covers the fitted ones, with NaN marking parameters
    the data cannot identify (also listed in ``degenerate``).
    ``cost_history`` records the cost after every accepted step.
    """

    parameters: dict[str, float]
    standard_errors: dict[str, float]
    residual_norm: float
    converged: bool
    iterations: int
    degenerate: tuple[str, ...] = ()
    cost_history: tuple[float, ...] = ()
    gradient_norm: float = np.nan


def _fd_jacobian(fun, x, lower=None, upper=None, rel_step=FD_REL_STEP):
    """Central-difference Jacobian of ``fun`` at ``x`` (columns = parameters).

    Probe points are kept inside the bounds; a parameter sitting on a bound
    gets a one-sided difference instead.
    """
    x = np.asarray(x, dtype=float)
    lower = np.full(x.size, -np.inf) if lower is None else lower
    upper = np.full(x.size, np.inf) if upper is None else upper
    f0 = np.asarray(fun(x))
    jac = np.empty((f0.size, x.size))
    for k in range(x.size):
        h = rel_step * max(abs(x[k]), 1.0)
        hp = min(h, upper[k] - x[k])
        hm = min(h, x[k] - lower[k])
        if hp + hm <= 0.0:
            jac[:, k] = 0.0
            continue
        xp, xm = x.copy(), x.copy()
        xp[k] += hp
        xm[k] -= hm
        jac[:, k] = (np.asarray(fun(xp)) - np.asarray(fun(xm))) / (hp + hm)
    return jac


def _project(x, lower, upper):
    return np.minimum(np.maximum(x, lower), upper)


def _projected_gradient(grad, x, lower, upper):
    """Zero out gradient components that push against an active bound."""
    g = grad.copy()
    at_lower = (x <= lower) & (g > 0.0)
    at_upper = (x >= upper) & (g < 0.0)
    g[at_lower | at_upper] = 0.0
    return g


@dataclass(frozen=True)
class LmOutcome:
    x: np.ndarray
    cost: float
    grad_norm: float
    iterations: int
    converged: bool
    jacobian: np.ndarray
    residual: np.ndarray
    cost_history: tuple[float, ...]


def levenberg_marquardt(
    residual,
    x0,
    lower=None,
    upper=None,
    max_iter: int = 200,
    ftol: float = 1e-8,
    xtol: float = 1e-14,
    gtol: float = 1e-5,
    residual_floor: float = 0.0,
) -> LmOutcome:
    """Damped Gauss-Newton minimisation of sum(residual(x)^2).

    Bounds are enforced by projection.  The cost of every accepted step is
    recorded; by construction it never increases.  Iteration stops when no
    downhill step exists or the relative cost improvement drops below
    ``ftol`` (chasing deeper merely overfits flat directions); the
    ``converged`` flag reflects the projected-gradient criterion
    ``|J^T r| <= gtol * (1 + |J^T r|_0)``, or a residual norm at or below
    ``residual_floor`` (the rounding floor of the data, where gradients
    carry no information).
    """
    x = np.asarray(x0, dtype=float).copy()
    n = x.size
    lower = np.full(n, -np.inf) if lower is None else np.asarray(lower, dtype=float)
    upper = np.full(n, np.inf) if upper is None else np.asarray(upper, dtype=float)
    if np.any(x < lower) or np.any(x > upper):
        raise InvalidParameterError("initial guess lies outside the bounds")

    r = np.asarray(residual(x))
    cost = float(r @ r)
    history = [cost]
    lam = 1e-3
    jac = _fd_jacobian(residual, x, lower, upper)
    grad = jac.T @ r
    gtol_abs = gtol * (1.0 + float(np.linalg.norm(_projected_gradient(grad, x, lower, upper))))

    # Iterate until progress stalls (ftol/xtol or no downhill step); the
    # gradient criterion only decides the converged flag afterwards.
    iterations = 0
    for iterations in range(1, max_iter + 1):
        grad = jac.T @ r
        jtj = jac.T @ jac
        mu = max(float(np.trace(jtj)) / n, np.finfo(float).tiny)
        accepted = False
        converged_step = converged_x = False
        for _ in range(40):
            try:
                delta = np.linalg.solve(jtj + lam * mu * np.eye(n), -grad)
            except np.linalg.LinAlgError:
                lam *= 10.0
                continue
            x_new = _project(x + delta, lower, upper)
            r_new = np.asarray(residual(x_new))
            cost_new = float(r_new @ r_new)
            if cost_new < cost:
                accepted = True
                lam = max(lam / 3.0, 1e-12)
                step = np.linalg.norm(x_new - x)
                converged_step = (cost - cost_new) <= ftol * max(cost, np.finfo(float).tiny)
                converged_x = step <= xtol * (np.linalg.norm(x) + xtol)
                x, r, cost = x_new, r_new, cost_new
                history.append(cost)
                jac = _fd_jacobian(residual, x, lower, upper)
                break
            lam *= 10.0
            if lam > 1e14:
                break
        if not accepted or converged_step or converged_x:
            break

    grad = jac.T @ r
    proj_norm = float(np.linalg.norm(_projected_gradient(grad, x, lower, upper)))
    at_floor = float(np.linalg.norm(r)) <= residual_floor
    return LmOutcome(
        x=x,
        cost=cost,
        grad_norm=proj_norm,
        iterations=iterations,
        converged=proj_norm <= gtol_abs or at_floor,
        jacobian=jac,
        residual=r,
        cost_history=tuple(history),
    )


def _degenerate_names(jacobian, names):
    """Names of parameters whose columns carry (almost) no information."""
    norms = np.linalg.norm(jacobian, axis=0)
    ref = norms.max()
    if ref == 0.0:
        return tuple(names)
    return tuple(n for n, c in zip(names, norms) if c < DEGENERATE_COLUMN_RTOL * ref)


def _worst_pair(jacobian, names):
    """The two parameters dominating the Jacobian's null direction."""
    _, _, vt = np.linalg.svd(jacobian, full_matrices=False)
    null = np.abs(vt[-1])
    order = np.argsort(null)[::-1]
    return tuple(names[k] for k in order[:2])


def _standard_errors(jacobian, residual, names, degenerate):
    m, n = jacobian.shape
    dof = max(m - n, 1)
    s2 = float(residual @ residual) / dof
    jtj = jacobian.T @ jacobian
    cov = np.linalg.pinv(jtj, rcond=1e-12) * s2
    errs = {}
    for k, name in enumerate(names):
        if name in degenerate:
            errs[name] = np.nan
        else:
            errs[name] = float(np.sqrt(max(cov[k, k], 0.0)))
    return errs


def _run_named_fit(
    model_residual,
    names,
    init,
    scales,
    lower,
    upper,
    fixed=None,
    max_iter=200,
    strict_singular=False,
    residual_floor=0.0,
):
    """Scale, fit and unpack a named-parameter least-squares problem."""
    fixed = dict(fixed or {})
    free = [n for n in names if n not in fixed]
    x0 = np.array([init[n] / scales[n] for n in free])
    lo = np.array([lower.get(n, -np.inf) / scales[n] for n in free])
    hi = np.array([upper.get(n, np.inf) / scales[n] for n in free])

    def assemble(z):
        params = dict(fixed)
        for name, value in zip(free, z):
            params[name] = value * scales[name]
        return params

    def residual(z):
        return model_residual(assemble(z))

    outcome = levenberg_marquardt(
        residual, x0, lo, hi, max_iter=max_iter, residual_floor=residual_floor
    )
    degenerate = _degenerate_names(outcome.jacobian, free)
    if strict_singular and not degenerate:
        # A vanishing singular value with no single dead column points at a
        # genuinely degenerate pair; name it rather than report noise.
        svals = np.linalg.svd(outcome.jacobian, compute_uv=False)
        if svals[0] > 0 and svals[-1] < 1e-12 * svals[0]:
            pair = _worst_pair(outcome.jacobian, free)
            raise SingularJacobianError(
                f"singular Jacobian: parameters {pair} are degenerate", parameters=pair
            )
    errs_scaled = _standard_errors(outcome.jacobian, outcome.residual, free, degenerate)
    errors = {n: errs_scaled[n] * scales[n] for n in free}
    params = assemble(outcome.x)
    return FitResult(
        parameters=params,
        standard_errors=errors,
        residual_norm=float(np.sqrt(outcome.cost)),
        converged=outcome.converged,
        iterations=outcome.iterations,
        degenerate=degenerate,
        cost_history=outcome.cost_history,
        gradient_norm=outcome.grad_norm,
    )


# ---------------------------------------------------------------------------
# Trace model: three-level line + auxiliary Lorentzian through the readout
# ---------------------------------------------------------------------------

#: Parameters of the trace model.  Rates and detunings are angular (rad/s),
#: centres are trace-axis frequencies in Hz, gains/offsets/depths raw.
EIT_PARAM_NAMES = (
    "gamma_opt",
    "gamma_hf",
    "omega_c",
    "alpha0l",
    "probe_center",
    "couple_detuning",
    "aux_depth",
    "aux_center",
    "aux_fwhm",
    "amp_gain",
    "phase_gain",
    "phase_offset",
)


def eit_trace_chi(freq_hz, params):
    """Composite susceptibility: three-level line plus auxiliary Lorentzian."""
    freq_hz = np.asarray(freq_hz, dtype=float)
    line = EitLineParams.from_fwhm(
        gamma_opt=params["gamma_opt"],
        gamma_hf=params["gamma_hf"],
        omega_c=params["omega_c"],
        alpha0l=params["alpha0l"],
    )
    delta_ge = TWO_PI * (freq_hz - params["probe_center"])
    chi = susceptibility(line, delta_ge, params["couple_detuning"])
    half = 0.5 * params["aux_fwhm"]
    delta_aux = TWO_PI * (freq_hz - params["aux_center"])
    chi = chi + params["aux_depth"] * 1j * half / (half + 1j * delta_aux)
    return chi


def eit_trace_model(freq_hz, params):
    """Amplitude (dB) and phase (rad) of the modelled trace."""
    chi = eit_trace_chi(freq_hz, params)
    amplitude = params["amp_gain"] * ovna_amplitude(chi)
    amp_db = 20.0 * np.log10(amplitude)
    phase = params["phase_gain"] * ovna_phase(chi) + params["phase_offset"]
    return amp_db, phase


@dataclass(frozen=True)
class GaussianNoise:
    """Multiplicative amplitude noise and additive phase noise."""

    sigma_amp: float = 0.02  # relative, on the linear amplitude
    sigma_phase: float = 0.02  # rad


def generate_synthetic_trace(
    params,
    grid_hz,
    noise: GaussianNoise | None = None,
    seed: int = 0,
) -> OvnaTrace:
    """Evaluate the trace model on a grid, optionally adding seeded noise."""
    grid_hz = np.asarray(grid_hz, dtype=float)
    amp_db, phase = eit_trace_model(grid_hz, params)
    if noise is not None:
        rng = np.random.default_rng(seed)
        linear = 10.0 ** (amp_db / 20.0)
        linear = linear * (1.0 + noise.sigma_amp * rng.standard_normal(grid_hz.size))
        amp_db = 20.0 * np.log10(np.maximum(linear, 1e-12))
        phase = phase + noise.sigma_phase * rng.standard_normal(grid_hz.size)
    return OvnaTrace(frequency=grid_hz, amplitude_db=amp_db, phase_rad=phase)


def _half_crossings(x, y, level):
    """Outermost x positions where y crosses ``level`` (linear interpolation)."""
    above = y >= level
    idx = np.nonzero(above)[0]
    if idx.size == 0:
        return None
    lo, hi = idx[0], idx[-1]

    def interp(i, j):
        if y[j] == y[i]:
            return x[i]
        return x[i] + (level - y[i]) * (x[j] - x[i]) / (y[j] - y[i])

    left = x[lo] if lo == 0 else interp(lo - 1, lo)
    right = x[hi] if hi == y.size - 1 else interp(hi + 1, hi)
    return left, right


def initial_guess_from_trace(trace: OvnaTrace) -> dict[str, float]:
    """Basin-finding heuristics for the trace fit.

    Gain comes from the off-resonant edges; the broad-line width gives
    Gamma_opt; the dip depth and width give Omega_c and Gamma_HF through
    the inverted visibility and window-width relations.
    """
    f = np.asarray(trace.frequency, dtype=float)
    linear = 10.0 ** (np.asarray(trace.amplitude_db, dtype=float) / 20.0)
    n_edge = max(2, f.size // 10)
    gain = float(np.median(np.concatenate([linear[:n_edge], linear[-n_edge:]])))
    od = linear / gain - 1.0  # small-signal readout: amplitude ~ gain (1 + Im chi)

    od_peak = float(od.max())
    crossings = _half_crossings(f, od, 0.5 * od_peak)
    if crossings is None or od_peak <= 0.0:
        raise InvalidParameterError("trace has no absorption feature to initialise from")
    left, right = crossings
    gamma_opt = TWO_PI * max(right - left, (f[1] - f[0]))
    center = 0.5 * (left + right)

    # Transparency dip: minimum inside the central quarter of the line.
    core = np.abs(f - center) <= max((right - left) / 4.0, 2.0 * (f[1] - f[0]))
    dip_idx = np.nonzero(core)[0]
    od_dip = float(od[dip_idx].min()) if dip_idx.size else od_peak
    f_dip = float(f[dip_idx[np.argmin(od[dip_idx])]]) if dip_idx.size else center
    visibility = max(min((od_peak - od_dip) / max(od_peak, 1e-12), 0.95), 0.05)

    dip_level = od_dip + 0.5 * (od_peak - od_dip)
    inside = dip_idx[od[dip_idx] <= dip_level]
    if inside.size >= 2:
        gamma_eit = TWO_PI * (f[inside[-1]] - f[inside[0]])
    else:
        gamma_eit = 0.2 * gamma_opt
    gamma_eit = max(gamma_eit, TWO_PI * (f[1] - f[0]))
    gamma_hf = (1.0 - visibility) * gamma_eit
    omega_c = float(np.sqrt(visibility * gamma_opt * gamma_eit))

    # Auxiliary line: strongest feature outside the main line's core.
    outside = np.abs(f - center) > 1.5 * (right - left)
    if np.any(outside):
        aux_idx = np.nonzero(outside)[0][np.argmax(od[outside])]
        aux_center = float(f[aux_idx])
        aux_depth = max(float(od[aux_idx]), 1e-3 * od_peak)
    else:
        aux_center = center - 2.0 * (right - left)
        aux_depth = 0.05 * od_peak

    return {
        "gamma_opt": float(gamma_opt),
        "gamma_hf": float(max(gamma_hf, 0.05 * gamma_opt / 10.0)),
        "omega_c": omega_c,
        "alpha0l": od_peak,
        "probe_center": float(center),
        "couple_detuning": TWO_PI * (f_dip - center),
        "aux_depth": aux_depth,
        "aux_center": aux_center,
        "aux_fwhm": float(gamma_opt),
        "amp_gain": gain,
        "phase_gain": 1.0,
        "phase_offset": 0.0,
    }


def _eit_scales(init):
    span = max(abs(init["gamma_opt"]), TWO_PI * 1e6)
    return {
        "gamma_opt": span,
        "gamma_hf": max(abs(init["gamma_hf"]), 0.05 * span),
        "omega_c": max(abs(init["omega_c"]), 0.1 * span),
        "alpha0l": max(abs(init["alpha0l"]), 0.1),
        "probe_center": span / TWO_PI,
        "couple_detuning": 0.1 * span,
        "aux_depth": max(abs(init["aux_depth"]), 0.05),
        "aux_center": span / TWO_PI,
        "aux_fwhm": span,
        "amp_gain": max(abs(init["amp_gain"]), 0.1),
        "phase_gain": 1.0,
        "phase_offset": 0.5,
    }


def fit_eit_trace(
    trace: OvnaTrace,
    init: dict[str, float] | None = None,
    bounds: dict[str, tuple[float, float]] | None = None,
    vary_readout: bool = False,
    max_iter: int = 200,
) -> FitResult:
    """Joint amplitude+phase fit of the transparency line and its neighbour.

    The amplitude gain starts from the off-resonant baseline, which breaks
    its ambiguity with the depth scale (the wings of the window pin it);
    phase gain and offset stay fixed at their trivial values unless
    ``vary_readout`` is set.  Supplied ``init`` entries override the
    heuristics; ``bounds`` entries override the defaults (a wide
    multiplicative band around the initial guess).
    """
    guess = initial_guess_from_trace(trace)
    if init:
        unknown = set(init) - set(EIT_PARAM_NAMES)
        if unknown:
            raise InvalidParameterError(f"unknown fit parameters: {sorted(unknown)}")
        guess.update(init)

    span = TWO_PI * (trace.frequency[-1] - trace.frequency[0])
    lower = {
        "gamma_opt": 1e-3 * guess["gamma_opt"],
        "gamma_hf": 1e-3 * guess["gamma_hf"],
        "omega_c": 0.0,
        "alpha0l": 1e-4,
        "probe_center": trace.frequency[0],
        "couple_detuning": -0.5 * span,
        "aux_depth": 0.0,
        "aux_center": trace.frequency[0],
        "aux_fwhm": 1e-3 * guess["gamma_opt"],
        "amp_gain": 1e-6,
        "phase_gain": -10.0,
        "phase_offset": -np.pi,
    }
    upper = {
        "gamma_opt": 1e3 * guess["gamma_opt"],
        "gamma_hf": 1e3 * guess["gamma_hf"],
        "omega_c": 10.0 * guess["gamma_opt"],
        "alpha0l": 1e3,
        "probe_center": trace.frequency[-1],
        "couple_detuning": 0.5 * span,
        "aux_depth": 1e3,
        "aux_center": trace.frequency[-1],
        "aux_fwhm": 1e3 * guess["gamma_opt"],
        "amp_gain": 1e6,
        "phase_gain": 10.0,
        "phase_offset": np.pi,
    }
    for name, (lo, hi) in (bounds or {}).items():
        lower[name], upper[name] = lo, hi
    for name in EIT_PARAM_NAMES:
        if not lower[name] <= guess[name] <= upper[name]:
            raise InvalidParameterError(
                f"initial {name} = {guess[name]:g} outside bounds "
                f"[{lower[name]:g}, {upper[name]:g}]"
            )

    fixed = {}
    if not vary_readout:
        fixed["phase_gain"] = guess["phase_gain"]
        fixed["phase_offset"] = guess["phase_offset"]

    amp_data = np.asarray(trace.amplitude_db, dtype=float)
    phase_data = np.asarray(trace.phase_rad, dtype=float)
    s_amp = max(float(np.std(amp_data)), 1e-12)
    s_phase = max(float(np.std(phase_data)), 1e-12)
    w = np.sqrt(trace.weight) if trace.weight is not None else 1.0

    def model_residual(params):
        amp_model, phase_model = eit_trace_model(trace.frequency, params)
        return np.concatenate(
            [w * (amp_model - amp_data) / s_amp, w * (phase_model - phase_data) / s_phase]
        )

    data_scale = np.linalg.norm(np.concatenate([amp_data / s_amp, phase_data / s_phase]))
    return _run_named_fit(
        model_residual,
        EIT_PARAM_NAMES,
        guess,
        _eit_scales(guess),
        lower,
        upper,
        fixed=fixed,
        max_iter=max_iter,
        strict_singular=True,
        residual_floor=8.0 * np.finfo(float).eps * data_scale,
    )


# ---------------------------------------------------------------------------
# Linewidth-series fits
# ---------------------------------------------------------------------------

TEMPERATURE_PARAM_NAMES = ("gamma_hf0", "gamma_nqp", "t_min")
FIELD_PARAM_NAMES = ("gamma_hf0", "delta_b_noise")


def fit_temperature_series(
    temperatures,
    gamma_hf,
    init: dict[str, float] | None = None,
    hbar_omega_over_kb: float = 0.05,
    max_iter: int = 200,
) -> FitResult:
    """Fit the bottleneck model to (T, Gamma_HF) points.

    The spin quantum (as a temperature) stays fixed at the configured
    value.  An unidentifiable parameter (for instance t_min when the series
    is flat) is reported through ``degenerate``/NaN standard error rather
    than silently assigned a value.
    """
    temperatures = np.asarray(temperatures, dtype=float)
    gamma_hf = np.asarray(gamma_hf, dtype=float)
    if temperatures.size != gamma_hf.size or temperatures.size < 3:
        raise InvalidParameterError("need at least 3 matching (T, Gamma_HF) points")
    omega_spin = kelvin_to_angular(hbar_omega_over_kb)

    guess = {
        "gamma_hf0": float(gamma_hf.min()),
        "gamma_nqp": 2e-3,
        "t_min": float(0.5 * (temperatures.min() + temperatures.max())),
    }
    if init:
        guess.update(init)
    scales = {
        "gamma_hf0": max(abs(guess["gamma_hf0"]), 1.0),
        "gamma_nqp": max(abs(guess["gamma_nqp"]), 1e-4),
        "t_min": max(abs(guess["t_min"]), 0.05),
    }
    lower = {"gamma_hf0": 1e-6 * scales["gamma_hf0"], "gamma_nqp": 0.0, "t_min": 1e-3}
    upper = {"gamma_hf0": np.inf, "gamma_nqp": 1.0, "t_min": 100.0}

    def model_residual(params):
        p = NqpParams(
            omega_spin=omega_spin,
            gamma_hf0=params["gamma_hf0"],
            gamma_nqp=params["gamma_nqp"],
            t_min=params["t_min"],
        )
        return gamma_hf_vs_temperature(p, temperatures) - gamma_hf

    return _run_named_fit(
        model_residual,
        TEMPERATURE_PARAM_NAMES,
        guess,
        scales,
        lower,
        upper,
        max_iter=max_iter,
        residual_floor=8.0 * np.finfo(float).eps * float(np.linalg.norm(gamma_hf)),
    )


def fit_field_series(
    delta_b,
    gamma_hf,
    s2: float,
    init: dict[str, float] | None = None,
    max_iter: int = 200,
) -> FitResult:
    """Fit (Gamma_HF0, delta_B) to (field detuning, Gamma_HF) points at fixed S2."""
    delta_b = np.asarray(delta_b, dtype=float)
    gamma_hf = np.asarray(gamma_hf, dtype=float)
    if delta_b.size != gamma_hf.size or delta_b.size < 2:
        raise InvalidParameterError("need at least 2 matching (dB, Gamma_HF) points")

    guess = {
        "gamma_hf0": float(gamma_hf.min()),
        "delta_b_noise": 0.1e-3,
    }
    if init:
        guess.update(init)
    scales = {
        "gamma_hf0": max(abs(guess["gamma_hf0"]), 1.0),
        "delta_b_noise": max(abs(guess["delta_b_noise"]), 1e-5),
    }
    lower = {"gamma_hf0": 1e-6 * scales["gamma_hf0"], "delta_b_noise": 0.0}
    upper = {"gamma_hf0": np.inf, "delta_b_noise": np.inf}

    def model_residual(params):
        model = SpinWidthModel(
            gamma_hf0=params["gamma_hf0"],
            delta_b_noise=params["delta_b_noise"],
            s2=s2,
        )
        return spin_linewidth(model, delta_b) - gamma_hf

    return _run_named_fit(
        model_residual,
        FIELD_PARAM_NAMES,
        guess,
        scales,
        lower,
        upper,
        max_iter=max_iter,
        residual_floor=8.0 * np.finfo(float).eps * float(np.linalg.norm(gamma_hf)),
    )

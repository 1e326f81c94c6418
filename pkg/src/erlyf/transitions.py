"""Optical transitions, Λ-system selection, ZEFOZ search and the spin-width
field model.

Optical transition strengths between the two manifolds are modelled with a
configurable electron-spin operator acting as identity on the nucleus; the
default S+ (x) 1 reproduces the equal coupling of the excited state to the
two clock-transition sublevels.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.optimize import brentq

from .errors import ContractViolationError, InvalidParameterError, SearchFailedError
from .spin import (
    FieldVector,
    LevelSet,
    PopulationSet,
    SpinParams,
    angular_momentum_matrices,
    diagonalize,
    raising_operator,
    track_indices,
)

OPERATOR_MODES = ("spin_flip_plus", "spin_flip_x", "identity")

AXIS_INDEX = {"x": 0, "y": 1, "z": 2}

#: Default finite-difference step for field derivatives: 0.01 mT.
FD_STEP_TESLA = 1e-5


@dataclass(frozen=True)
class Transition:
    """One optical line |g_i> <-> |e_j>.

    ``frequency`` is relative to the configured optical origin (rad/s);
    ``amplitude`` is the relative strength normalised to the strongest line.
    """

    ground_index: int
    excited_index: int
    frequency: float
    amplitude: float
    population_weight: float = 1.0


@dataclass(frozen=True)
class LambdaSystem:
    """A (|g>, |s>, |e>) triple with its two optical legs."""

    g_index: int
    s_index: int
    e_index: int
    probe_frequency: float
    couple_frequency: float
    amplitude_asymmetry: float

    @property
    def spin_frequency(self) -> float:
        """|g> <-> |s> splitting; exactly probe - couple by construction."""
        return self.probe_frequency - self.couple_frequency


@dataclass(frozen=True)
class ZefozReport:
    """Result of a clock-point search: residual gradient and curvatures."""

    field: FieldVector
    s1: np.ndarray  # (rad/s)/T per axis
    s2: np.ndarray  # (rad/s)/T^2 per axis
    spin_frequency: float
    iterations: int
    converged: bool
    grad_norm: float


@dataclass(frozen=True)
class SpinWidthModel:
    """Field dependence of the spin linewidth near the clock point.

    ``s2`` is the transition-frequency curvature along the detuning axis;
    the gradient at detuning dB is taken as dB * s2 unless an explicit
    ``s1`` override is supplied.  ``delta_b_noise`` is the magnetic noise
    amplitude experienced by the ions.
    """

    gamma_hf0: float  # rad/s, FWHM
    delta_b_noise: float  # tesla
    s2: float  # (rad/s)/T^2
    s1: float | None = None  # (rad/s)/T

    def __post_init__(self):
        if self.gamma_hf0 <= 0.0:
            raise InvalidParameterError("gamma_hf0 must be positive")
        if self.delta_b_noise < 0.0:
            raise InvalidParameterError("delta_b_noise must be non-negative")


def _electron_operator(spin_s: float, mode: str) -> np.ndarray:
    if mode == "spin_flip_plus":
        return raising_operator(spin_s)
    if mode == "spin_flip_x":
        return angular_momentum_matrices(spin_s)[0]
    if mode == "identity":
        dim = int(round(2 * spin_s + 1))
        return np.eye(dim, dtype=complex)
    raise InvalidParameterError(f"unknown operator mode {mode!r}; pick one of {OPERATOR_MODES}")


def optical_amplitudes(
    ground: LevelSet,
    excited: LevelSet,
    operator_mode: str = "spin_flip_plus",
) -> np.ndarray:
    """Relative strengths |<e_j| O |g_i>|, normalised so the maximum is 1.

    Row i is the ground level, column j the excited level.  Both LevelSets
    must share the same product-basis enumeration.
    """
    if ground.basis is None or excited.basis is None or ground.basis != excited.basis:
        raise ContractViolationError("ground and excited LevelSets use different bases")
    ms_values = sorted({ms for ms, _ in ground.basis})
    ni = len({mi for _, mi in ground.basis})
    spin_s = max(ms_values)
    op = np.kron(_electron_operator(spin_s, operator_mode), np.eye(ni, dtype=complex))
    amps = np.abs(excited.states.conj().T @ op @ ground.states).T
    peak = amps.max()
    if peak > 0.0:
        amps = amps / peak
    return amps


def optical_transitions(
    ground: LevelSet,
    excited: LevelSet,
    populations: PopulationSet | None = None,
    operator_mode: str = "spin_flip_plus",
    origin_offset: float = 0.0,
) -> list[Transition]:
    """Enumerate all lines between the manifolds with relative strengths."""
    amps = optical_amplitudes(ground, excited, operator_mode)
    weights = populations.probabilities if populations is not None else np.ones(ground.dim)
    lines = []
    for i in range(ground.dim):
        for j in range(excited.dim):
            lines.append(
                Transition(
                    ground_index=i,
                    excited_index=j,
                    frequency=float(excited.energies[j] - ground.energies[i] + origin_offset),
                    amplitude=float(amps[i, j]),
                    population_weight=float(weights[i]),
                )
            )
    return lines


def _lorentzian_unit_area(x: np.ndarray, fwhm: float) -> np.ndarray:
    half = 0.5 * fwhm
    return (half / np.pi) / (x * x + half * half)


def _gaussian_unit_area(x: np.ndarray, fwhm: float) -> np.ndarray:
    sigma = fwhm / np.sqrt(8.0 * np.log(2.0))
    return np.exp(-0.5 * (x / sigma) ** 2) / (sigma * np.sqrt(2.0 * np.pi))


def synthesize_absorption(
    transitions: list[Transition],
    lineshape: str = "lorentzian",
    fwhm: float = 1.0,
    grid: np.ndarray | None = None,
    peak_depth: float = 1.0,
) -> np.ndarray:
    """Population- and amplitude-weighted sum of unit-area lineshapes.

    ``grid`` and ``fwhm`` are angular frequencies; the result is an optical
    depth profile scaled by ``peak_depth``.
    """
    if fwhm <= 0.0:
        raise InvalidParameterError("fwhm must be positive")
    if grid is None or np.size(grid) == 0:
        raise InvalidParameterError("frequency grid must not be empty")
    if lineshape == "lorentzian":
        shape = _lorentzian_unit_area
    elif lineshape == "gaussian":
        shape = _gaussian_unit_area
    else:
        raise InvalidParameterError(f"unknown lineshape {lineshape!r}")
    grid = np.asarray(grid, dtype=float)
    depth = np.zeros_like(grid)
    for line in transitions:
        weight = line.amplitude * line.population_weight
        if weight != 0.0:
            depth += weight * shape(grid - line.frequency, fwhm)
    return peak_depth * depth


def find_lambda_systems(
    ground: LevelSet,
    excited: LevelSet,
    populations: PopulationSet,
    asymmetry_tol: float = 0.05,
    isolation_tol: float = 0.1,
    operator_mode: str = "spin_flip_plus",
) -> list[LambdaSystem]:
    """All (g, s, e) triples forming an isolated, near-symmetric Lambda.

    A triple qualifies when the strongest competing leg from the same
    excited level stays below ``isolation_tol`` times the weaker Lambda leg
    and the leg asymmetry is within ``asymmetry_tol`` (inclusive).  Results
    are sorted most-symmetric first.  |g> is the more populated partner.
    """
    for name, tol in (("asymmetry_tol", asymmetry_tol), ("isolation_tol", isolation_tol)):
        if not 0.0 <= tol < 1.0:
            raise InvalidParameterError(f"{name} must lie in [0, 1), got {tol}")
    amps = optical_amplitudes(ground, excited, operator_mode)
    probs = populations.probabilities
    found = []
    d_g = ground.dim
    for e in range(excited.dim):
        legs = amps[:, e]
        for a in range(d_g):
            if legs[a] <= 0.0:
                continue
            for b in range(a + 1, d_g):
                if legs[b] <= 0.0:
                    continue
                competing = np.delete(legs, [a, b])
                strongest = competing.max() if competing.size else 0.0
                if strongest > isolation_tol * min(legs[a], legs[b]):
                    continue
                # More populated level plays |g>.
                g, s = (a, b) if probs[a] >= probs[b] else (b, a)
                asym = float((legs[g] - legs[s]) / (legs[g] + legs[s]))
                if abs(asym) > asymmetry_tol:
                    continue
                probe = float(excited.energies[e] - ground.energies[g])
                couple = float(excited.energies[e] - ground.energies[s])
                found.append(
                    LambdaSystem(
                        g_index=g,
                        s_index=s,
                        e_index=e,
                        probe_frequency=probe,
                        couple_frequency=couple,
                        amplitude_asymmetry=asym,
                    )
                )
    found.sort(key=lambda lam: (abs(lam.amplitude_asymmetry), lam.e_index, lam.g_index))
    return found


def pair_indices_by_character(
    levels: LevelSet,
    basis_states: tuple[tuple[float, float], tuple[float, float]] = ((-0.5, 3.5), (0.5, 2.5)),
) -> tuple[int, int]:
    """Indices (sorted by energy) of the two eigenstates living in the
    subspace spanned by the named |m_s, m_I> basis states.

    The default picks the clock-transition pair of 167Er:LiYF4, whose
    members are even mixtures of |-1/2, 7/2> and |+1/2, 5/2> at the clock
    field.
    """
    if levels.basis is None:
        raise ContractViolationError("LevelSet carries no basis labels")
    try:
        rows = [levels.basis.index(bs) for bs in basis_states]
    except ValueError as exc:
        raise InvalidParameterError(f"basis states {basis_states} not in the manifold") from exc
    weight = np.sum(np.abs(levels.states[rows, :]) ** 2, axis=0)
    top = np.argsort(weight)[::-1][:2]
    return tuple(sorted(int(k) for k in top))


def spin_transition_frequency(
    p: SpinParams,
    g_index: int,
    s_index: int,
    b: FieldVector,
    reference_field: FieldVector | None = None,
    tracking_steps: int = 16,
) -> float:
    """E_s - E_g at field ``b`` (rad/s).

    With ``reference_field`` given, the indices are interpreted at the
    reference point and followed adiabatically to ``b``; otherwise they
    index the energy-sorted spectrum at ``b`` directly.
    """
    levels = diagonalize(p, b)
    if not (0 <= g_index < levels.dim and 0 <= s_index < levels.dim):
        raise InvalidParameterError(
            f"level indices ({g_index}, {s_index}) outside manifold of dimension {levels.dim}"
        )
    if reference_field is not None:
        g_index, s_index = track_indices(
            p, (g_index, s_index), reference_field, b, steps=tracking_steps
        )
    return float(levels.energies[s_index] - levels.energies[g_index])


class _TrackedPair:
    """Pair frequency omega(B) with indices followed from an anchor point.

    Evaluations are expected to stay near the most recent anchor; the
    anchor advances on request, so a sequence of accepted search steps
    tracks the pair across the whole path.
    """

    def __init__(self, p: SpinParams, g_index: int, s_index: int, anchor: FieldVector):
        self.p = p
        self.anchor_levels = diagonalize(p, anchor)
        self.g_index = g_index
        self.s_index = s_index

    def _isolated(self, index: int) -> bool:
        """Whether the anchor level sits outside any near-degenerate cluster.

        Inside a cluster the anchor's own eigenbasis is gauge noise and
        overlap matching must not be trusted, however confident it looks.
        """
        energies = self.anchor_levels.energies
        spread = max(float(energies[-1] - energies[0]), 1.0)
        gap = np.inf
        if index > 0:
            gap = min(gap, energies[index] - energies[index - 1])
        if index < energies.size - 1:
            gap = min(gap, energies[index + 1] - energies[index])
        return gap > 1e-8 * spread

    def frequency(self, field: FieldVector, advance: bool = False) -> float:
        levels = diagonalize(self.p, field)
        overlap = np.abs(self.anchor_levels.states.conj().T @ levels.states) ** 2
        g_best = int(np.argmax(overlap[self.g_index]))
        s_best = int(np.argmax(overlap[self.s_index]))
        g_clean = overlap[self.g_index, g_best] >= 0.5 and self._isolated(self.g_index)
        s_clean = overlap[self.s_index, s_best] >= 0.5 and self._isolated(self.s_index)
        anchor_freq = float(
            self.anchor_levels.energies[self.s_index] - self.anchor_levels.energies[self.g_index]
        )

        def by_frequency(fixed: int, sign: float) -> int:
            # Inside a (near-)degenerate multiplet the eigenvector basis is
            # gauge noise; the pair frequency is the continuous observable,
            # so pick the partner reproducing it best.
            candidates = sign * (levels.energies - levels.energies[fixed])
            candidates = np.abs(candidates - anchor_freq).astype(float)
            candidates[fixed] = np.inf
            return int(np.argmin(candidates))

        if g_clean and s_clean:
            g, s = g_best, s_best
        elif g_clean:
            g, s = g_best, by_frequency(g_best, 1.0)
        elif s_clean:
            g, s = by_frequency(s_best, -1.0), s_best
        else:
            g = int(np.argmin(np.abs(levels.energies - self.anchor_levels.energies[self.g_index])))
            g, s = g, by_frequency(g, 1.0)
        if g == s:
            raise SearchFailedError(
                "adiabatic tracking collapsed the level pair; "
                "step from the last anchor is too large"
            )
        if advance:
            self.anchor_levels = levels
            self.g_index, self.s_index = g, s
        return float(levels.energies[s] - levels.energies[g])


def _offset(field: FieldVector, axis: str, delta: float) -> FieldVector:
    arr = field.as_array()
    arr[AXIS_INDEX[axis]] += delta
    return FieldVector(*arr)


def _richardson_gradient(f, field: FieldVector, axis: str, h: float) -> float:
    def central(step):
        return (f(_offset(field, axis, step)) - f(_offset(field, axis, -step))) / (2 * step)

    coarse = central(h)
    fine = central(h / 2)
    return (4.0 * fine - coarse) / 3.0


def _richardson_curvature(f, field: FieldVector, axis: str, h: float) -> float:
    f0 = f(field)

    def second(step):
        return (f(_offset(field, axis, step)) - 2 * f0 + f(_offset(field, axis, -step))) / step**2

    coarse = second(h)
    fine = second(h / 2)
    return (4.0 * fine - coarse) / 3.0


def zefoz_search(
    p: SpinParams,
    g_index: int,
    s_index: int,
    seed: FieldVector,
    search_axes: tuple[str, ...] = ("z",),
    fd_step: float = FD_STEP_TESLA,
    grad_tol: float = 1e3,  # (rad/s)/T, ~0.16 Hz/mT
    max_iter: int = 60,
    max_step: float = 2e-3,  # tesla
) -> ZefozReport:
    """Locate the field where the pair-frequency gradient vanishes.

    Newton iteration on Richardson-extrapolated central differences, one
    axis at a time; indices are tracked adiabatically from the seed.  On
    hitting the iteration cap a SearchFailedError carrying the best iterate
    is raised.
    """
    for axis in search_axes:
        if axis not in AXIS_INDEX:
            raise InvalidParameterError(f"unknown search axis {axis!r}")
    pair = _TrackedPair(p, g_index, s_index, seed)

    def gradient_vector(fld: FieldVector) -> np.ndarray:
        s1 = np.zeros(3)
        for ax in search_axes:
            s1[AXIS_INDEX[ax]] = _richardson_gradient(pair.frequency, fld, ax, fd_step)
        return s1

    def full_report(fld: FieldVector, iterations: int) -> ZefozReport:
        freq = pair.frequency(fld, advance=True)
        s1 = np.zeros(3)
        s2 = np.zeros(3)
        for ax in "xyz":
            s1[AXIS_INDEX[ax]] = _richardson_gradient(pair.frequency, fld, ax, fd_step)
            s2[AXIS_INDEX[ax]] = _richardson_curvature(pair.frequency, fld, ax, fd_step)
        searched = [AXIS_INDEX[ax] for ax in search_axes]
        norm = float(np.linalg.norm(s1[searched]))
        return ZefozReport(
            field=fld,
            s1=s1,
            s2=s2,
            spin_frequency=freq,
            iterations=iterations,
            converged=norm <= grad_tol,
            grad_norm=norm,
        )

    field = seed
    best_field, best_norm = seed, np.inf
    for iteration in range(max_iter):
        pair.frequency(field, advance=True)
        grad = gradient_vector(field)
        norm = float(np.linalg.norm(grad))
        if norm < best_norm:
            best_field, best_norm = field, norm
        if norm <= grad_tol:
            return full_report(field, iteration)
        step = np.zeros(3)
        for ax in search_axes:
            k = AXIS_INDEX[ax]
            curv = _richardson_curvature(pair.frequency, field, ax, fd_step)
            if curv > 0.0 and abs(grad[k] / curv) <= max_step:
                step[k] = -grad[k] / curv
            else:
                step[k] = -np.sign(grad[k]) * max_step
        field = FieldVector(*(field.as_array() + step))

    raise SearchFailedError(
        f"ZEFOZ search did not reach |grad| <= {grad_tol:g} (rad/s)/T in {max_iter} iterations",
        best=full_report(best_field, max_iter),
    )


def refine_symmetric_field(
    p_ground: SpinParams,
    p_excited: SpinParams,
    g_index: int,
    s_index: int,
    e_index: int,
    b_start: FieldVector,
    window: float = 5e-4,
    operator_mode: str = "spin_flip_plus",
) -> FieldVector:
    """Polish the longitudinal field to the exactly symmetric Lambda point.

    The signed difference of the two Lambda leg strengths crosses zero
    linearly at the avoided-crossing centre, so a bracketing root solve
    pins the symmetric field far more tightly than finite-difference
    gradients can.  ``window`` is the bracket half-width in tesla.  Level
    indices refer to the energy-sorted spectra at ``b_start`` and must not
    reorder inside the window.
    """

    def signed_asymmetry(bz: float) -> float:
        g_levels = diagonalize(p_ground, FieldVector.longitudinal(bz))
        e_levels = diagonalize(p_excited, FieldVector.longitudinal(bz))
        amps = optical_amplitudes(g_levels, e_levels, operator_mode)
        a_ge = amps[g_index, e_index]
        a_se = amps[s_index, e_index]
        return float((a_ge - a_se) / (a_ge + a_se))

    lo, hi = b_start.bz - window, b_start.bz + window
    if signed_asymmetry(lo) * signed_asymmetry(hi) > 0.0:
        raise SearchFailedError(
            "no sign change of the leg asymmetry inside the bracket; "
            "start the refinement closer to the clock point"
        )
    root = brentq(signed_asymmetry, lo, hi, xtol=1e-14, rtol=8.9e-16)
    return FieldVector.longitudinal(float(root))


def spin_linewidth(model: SpinWidthModel, delta_b: float | np.ndarray):
    """Spin linewidth vs field detuning from the clock point.

    Gamma(dB) = Gamma_HF0 + S1 dB' + S2 dB' sqrt(2 dB'^2 + 4 dB^2) with
    dB' the magnetic noise amplitude and S1 = dB * S2 unless overridden.
    """
    delta_b = np.asarray(delta_b, dtype=float)
    s1 = model.s1 if model.s1 is not None else delta_b * model.s2
    noise = model.delta_b_noise
    value = model.gamma_hf0 + s1 * noise + model.s2 * noise * np.sqrt(
        2.0 * noise**2 + 4.0 * delta_b**2
    )
    return value if value.ndim else float(value)

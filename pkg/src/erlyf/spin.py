"""Effective spin Hamiltonian of one 4f manifold and its level structure.

The Hamiltonian of a Kramers doublet with effective electron spin S coupled
to a nuclear spin I in an axial crystal field is

    H = g_par mu_B B_z S_z + g_perp mu_B (B_x S_x + B_y S_y)
        + A I_z S_z + B (I_x S_x + I_y S_y) + P [I_z^2 - I(I+1)/3]

with the crystal c axis along z.  All couplings are stored as angular
frequencies (rad/s), so matrix elements of H are rad/s throughout.

The product basis is |m_s, m_I> with m_s major and m_I minor, both
descending; see :func:`basis_order`.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.optimize import linear_sum_assignment

from .errors import ContractViolationError, InvalidParameterError
from .units import HBAR, K_B, MU_B_OVER_HBAR

#: Absolute tolerance (relative to the matrix scale) for Hermiticity checks.
HERMITICITY_TOL = 1e-10

#: Eigenvalues closer than this (relative to the spectral range) are treated
#: as one degenerate cluster when fixing the eigenvector ordering.
DEGENERACY_RTOL = 1e-12


def _is_half_integer(x: float) -> bool:
    return abs(2.0 * x - round(2.0 * x)) < 1e-9


def angular_momentum_matrices(j: float) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Return (Jx, Jy, Jz) for spin j in the descending-m basis (m = j..-j)."""
    if j < 0 or not _is_half_integer(j):
        raise InvalidParameterError(f"spin must be a non-negative half-integer, got {j}")
    dim = int(round(2 * j + 1))
    m = j - np.arange(dim)
    jz = np.diag(m).astype(complex)
    # <m+1|J+|m> = sqrt(j(j+1) - m(m+1)); with descending order m+1 sits one row up.
    ladder = np.sqrt(j * (j + 1) - m[1:] * (m[1:] + 1))
    jp = np.zeros((dim, dim), dtype=complex)
    jp[np.arange(dim - 1), np.arange(1, dim)] = ladder
    jm = jp.conj().T
    jx = 0.5 * (jp + jm)
    jy = -0.5j * (jp - jm)
    return jx, jy, jz


def raising_operator(j: float) -> np.ndarray:
    """J+ for spin j in the descending-m basis."""
    jx, jy, _ = angular_momentum_matrices(j)
    return jx + 1j * jy


@dataclass(frozen=True)
class SpinParams:
    """Couplings of one electronic manifold (ground or excited).

    ``a_hf`` (axial hyperfine), ``b_hf`` (transverse hyperfine) and ``p_quad``
    (nuclear quadrupole) are angular frequencies in rad/s; the g factors are
    dimensionless.  Signs are unconstrained (both manifolds of 167Er:LiYF4
    have negative axial hyperfine constants).
    """

    g_par: float
    g_perp: float
    a_hf: float
    b_hf: float
    p_quad: float = 0.0
    spin_s: float = 0.5
    spin_i: float = 3.5

    def __post_init__(self):
        if self.spin_s < 0.5 or not _is_half_integer(self.spin_s):
            raise InvalidParameterError(f"S must be a half-integer >= 1/2, got {self.spin_s}")
        if self.spin_i < 0 or not _is_half_integer(self.spin_i):
            raise InvalidParameterError(f"I must be a non-negative half-integer, got {self.spin_i}")
        for name in ("g_par", "g_perp", "a_hf", "b_hf", "p_quad"):
            if not np.isfinite(getattr(self, name)):
                raise InvalidParameterError(f"{name} must be finite")

    @property
    def dim(self) -> int:
        """Manifold dimension (2S+1)(2I+1)."""
        return int(round(2 * self.spin_s + 1)) * int(round(2 * self.spin_i + 1))


@dataclass(frozen=True)
class FieldVector:
    """External magnetic field in tesla; z is the crystal c axis."""

    bx: float = 0.0
    by: float = 0.0
    bz: float = 0.0

    def __post_init__(self):
        for name in ("bx", "by", "bz"):
            if not np.isfinite(getattr(self, name)):
                raise InvalidParameterError(f"{name} must be finite")

    @classmethod
    def longitudinal(cls, bz: float) -> "FieldVector":
        return cls(0.0, 0.0, bz)

    def as_array(self) -> np.ndarray:
        return np.array([self.bx, self.by, self.bz])

    @property
    def magnitude(self) -> float:
        return float(np.linalg.norm(self.as_array()))

    def unit(self) -> np.ndarray:
        mag = self.magnitude
        if mag == 0.0:
            raise InvalidParameterError("cannot normalise a zero field vector")
        return self.as_array() / mag

    def plus(self, other: "FieldVector") -> "FieldVector":
        return FieldVector(self.bx + other.bx, self.by + other.by, self.bz + other.bz)

    def scaled(self, factor: float) -> "FieldVector":
        return FieldVector(self.bx * factor, self.by * factor, self.bz * factor)


def basis_order(p: SpinParams) -> tuple[tuple[float, float], ...]:
    """(m_s, m_I) labels of the product basis, m_s major, both descending."""
    ns = int(round(2 * p.spin_s + 1))
    ni = int(round(2 * p.spin_i + 1))
    ms = [p.spin_s - k for k in range(ns)]
    mi = [p.spin_i - k for k in range(ni)]
    return tuple((s, i) for s in ms for i in mi)


@dataclass(frozen=True)
class LevelSet:
    """Eigenvalues and eigenvectors of one manifold at one field point.

    ``energies`` are ascending angular frequencies; column ``states[:, k]``
    is the eigenvector of ``energies[k]`` in the :func:`basis_order` basis.
    """

    energies: np.ndarray
    states: np.ndarray
    basis: tuple[tuple[float, float], ...] | None = None

    @property
    def dim(self) -> int:
        return self.energies.size


@dataclass(frozen=True)
class PopulationSet:
    """Thermal occupation probabilities aligned with a LevelSet's ordering."""

    probabilities: np.ndarray
    temperature: float


def build_hamiltonian(p: SpinParams, b: FieldVector) -> np.ndarray:
    """Assemble the manifold Hamiltonian (rad/s) at field ``b``.

    Every term is Hermitian element by element, so the result is exactly
    Hermitian in floating point, not just up to rounding.
    """
    sx, sy, sz = angular_momentum_matrices(p.spin_s)
    ix, iy, iz = angular_momentum_matrices(p.spin_i)
    ns, ni = sx.shape[0], ix.shape[0]
    eye_s = np.eye(ns, dtype=complex)
    eye_i = np.eye(ni, dtype=complex)

    h = p.g_par * MU_B_OVER_HBAR * b.bz * np.kron(sz, eye_i)
    h = h + p.g_perp * MU_B_OVER_HBAR * (b.bx * np.kron(sx, eye_i) + b.by * np.kron(sy, eye_i))
    h = h + p.a_hf * np.kron(sz, iz)
    h = h + p.b_hf * (np.kron(sx, ix) + np.kron(sy, iy))
    quad = iz @ iz - (p.spin_i * (p.spin_i + 1) / 3.0) * eye_i
    h = h + p.p_quad * np.kron(eye_s, quad)
    return h


def _check_hermitian(h: np.ndarray) -> None:
    if h.ndim != 2 or h.shape[0] != h.shape[1]:
        raise ContractViolationError(f"expected a square matrix, got shape {h.shape}")
    scale = max(1.0, float(np.abs(h).max()))
    defect = float(np.abs(h - h.conj().T).max())
    if defect > HERMITICITY_TOL * scale:
        raise ContractViolationError(
            f"matrix is not Hermitian: max|H - H^+| = {defect:.3e} (scale {scale:.3e})"
        )


def _fix_phases(states: np.ndarray) -> np.ndarray:
    """Make the largest-magnitude component of each column real positive."""
    fixed = states.copy()
    for k in range(fixed.shape[1]):
        col = fixed[:, k]
        idx = int(np.argmax(np.abs(col)))
        pivot = col[idx]
        mag = abs(pivot)
        if mag > 0.0:
            fixed[:, k] = col * (pivot.conj() / mag)
            # Kill the residual imaginary part of the pivot outright.
            fixed[idx, k] = fixed[idx, k].real
    return fixed


def _order_degenerate(energies: np.ndarray, states: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Within each degenerate cluster, order eigenvectors by pivot basis index."""
    n = energies.size
    spread = max(float(energies[-1] - energies[0]), float(np.abs(energies).max()), 1.0)
    tol = DEGENERACY_RTOL * spread
    order = np.arange(n)
    start = 0
    while start < n:
        stop = start + 1
        while stop < n and energies[stop] - energies[stop - 1] <= tol:
            stop += 1
        if stop - start > 1:
            pivots = [int(np.argmax(np.abs(states[:, k]))) for k in range(start, stop)]
            order[start:stop] = start + np.argsort(np.array(pivots), kind="stable")
        start = stop
    return energies[order], states[:, order]


def eigensolve(h: np.ndarray, basis: tuple[tuple[float, float], ...] | None = None) -> LevelSet:
    """Full eigendecomposition with a deterministic gauge.

    Eigenvalues come out ascending; each eigenvector's largest-magnitude
    component is made real positive, and degenerate clusters are ordered by
    that component's basis index, so repeated runs are bit-identical.
    """
    _check_hermitian(h)
    energies, states = np.linalg.eigh(h)
    energies, states = _order_degenerate(energies, _fix_phases(states))
    states = _fix_phases(states)
    return LevelSet(energies=energies, states=states, basis=basis)


def diagonalize(p: SpinParams, b: FieldVector) -> LevelSet:
    """Build and diagonalize the manifold Hamiltonian at one field point."""
    return eigensolve(build_hamiltonian(p, b), basis=basis_order(p))


def boltzmann_populations(levels: LevelSet, temperature: float) -> PopulationSet:
    """Equilibrium occupations p_i = exp(-hbar E_i / k_B T) / Z."""
    if temperature <= 0.0:
        raise InvalidParameterError(f"temperature must be positive, got {temperature}")
    energies = levels.energies
    weights = np.exp(-HBAR * (energies - energies.min()) / (K_B * temperature))
    return PopulationSet(probabilities=weights / weights.sum(), temperature=temperature)


def _match_by_overlap(states_a: np.ndarray, states_b: np.ndarray) -> np.ndarray:
    """Permutation ``perm`` with column ``perm[k]`` of b continuing column k of a."""
    overlap = np.abs(states_a.conj().T @ states_b) ** 2
    rows, cols = linear_sum_assignment(-overlap)
    perm = np.empty(states_a.shape[1], dtype=int)
    perm[rows] = cols
    return perm


@dataclass(frozen=True)
class LevelSweep:
    """Level structure along a straight line in field space.

    ``level_sets[k]`` is the canonical (energy-sorted) decomposition at
    ``fields[k]``; ``branches[j]`` follows one adiabatic state across the
    sweep, and ``branch_index[k, j]`` maps branch j to its canonical index
    at point k.
    """

    fields: np.ndarray
    axis: np.ndarray
    level_sets: tuple[LevelSet, ...]
    branches: np.ndarray
    branch_index: np.ndarray

    @property
    def npoints(self) -> int:
        return self.fields.size


def sweep_levels(
    p: SpinParams,
    axis: FieldVector,
    b_range: tuple[float, float],
    n: int,
) -> LevelSweep:
    """Diagonalize on a uniform field grid and track states adiabatically.

    Tracking matches eigenvectors of consecutive grid points by maximal
    overlap (optimal assignment), so branch indices follow states through
    avoided crossings instead of jumping at each level reordering.
    """
    b_min, b_max = b_range
    if n < 2:
        raise InvalidParameterError(f"sweep needs at least 2 points, got {n}")
    if not b_min < b_max:
        raise InvalidParameterError(f"need b_min < b_max, got [{b_min}, {b_max}]")
    direction = axis.unit()
    fields = np.linspace(b_min, b_max, n)

    level_sets = []
    for b in fields:
        vec = FieldVector(*(direction * b))
        level_sets.append(diagonalize(p, vec))

    d = p.dim
    branch_index = np.empty((n, d), dtype=int)
    branch_index[0] = np.arange(d)
    for k in range(1, n):
        step_perm = _match_by_overlap(level_sets[k - 1].states, level_sets[k].states)
        branch_index[k] = step_perm[branch_index[k - 1]]

    branches = np.empty((d, n))
    for k in range(n):
        branches[:, k] = level_sets[k].energies[branch_index[k]]

    return LevelSweep(
        fields=fields,
        axis=direction,
        level_sets=tuple(level_sets),
        branches=branches,
        branch_index=branch_index,
    )


def track_indices(
    p: SpinParams,
    indices: tuple[int, ...],
    field_from: FieldVector,
    field_to: FieldVector,
    steps: int = 16,
) -> tuple[int, ...]:
    """Follow canonical level indices from one field point to another.

    Walks a straight line in field space in ``steps`` increments, matching
    eigenvectors by overlap at each increment.
    """
    if steps < 1:
        raise InvalidParameterError(f"steps must be >= 1, got {steps}")
    start = field_from.as_array()
    stop = field_to.as_array()
    current = diagonalize(p, field_from)
    mapping = np.arange(p.dim)
    for k in range(1, steps + 1):
        point = start + (stop - start) * (k / steps)
        nxt = diagonalize(p, FieldVector(*point))
        step_perm = _match_by_overlap(current.states, nxt.states)
        mapping = step_perm[mapping]
        current = nxt
    return tuple(int(mapping[i]) for i in indices)

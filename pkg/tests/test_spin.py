"""Level-structure module: Hamiltonian assembly, eigensolver contract,
sweeps with adiabatic tracking, thermal populations."""

import numpy as np
import pytest

from erlyf import (
    ContractViolationError,
    FieldVector,
    InvalidParameterError,
    SpinParams,
    basis_order,
    boltzmann_populations,
    build_hamiltonian,
    diagonalize,
    eigensolve,
    sweep_levels,
    track_indices,
)
from erlyf.spin import LevelSet
from erlyf.units import (
    HBAR,
    K_B,
    MU_B_OVER_HBAR,
    angular_to_ghz,
    kelvin_to_angular,
    mhz_to_angular,
)
from oracles import jacobi_eigh

B20 = FieldVector.longitudinal(20e-3)


def random_params(rng, spin_i=3.5):
    return SpinParams(
        g_par=rng.uniform(-10, 10),
        g_perp=rng.uniform(-10, 10),
        a_hf=mhz_to_angular(rng.uniform(-1000, 1000)),
        b_hf=mhz_to_angular(rng.uniform(-1000, 1000)),
        p_quad=mhz_to_angular(rng.uniform(-50, 50)),
        spin_i=spin_i,
    )


# ---------------------------------------------------------------------------
# Hamiltonian assembly
# ---------------------------------------------------------------------------


def test_all_couplings_off_gives_zero_matrix():
    p = SpinParams(g_par=0.0, g_perp=0.0, a_hf=0.0, b_hf=0.0)
    h = build_hamiltonian(p, FieldVector())
    assert h.shape == (16, 16)
    assert np.all(h == 0.0)


def test_pure_electron_zeeman_splitting():
    # S=1/2, I=0, g_par=2 at 1 T: diag(+-mu_B/hbar), splitting 2 mu_B/hbar.
    p = SpinParams(g_par=2.0, g_perp=0.0, a_hf=0.0, b_hf=0.0, spin_i=0.0)
    h = build_hamiltonian(p, FieldVector.longitudinal(1.0))
    expected = np.diag([MU_B_OVER_HBAR, -MU_B_OVER_HBAR])
    assert np.allclose(h, expected, rtol=1e-15, atol=0.0)
    splitting_ghz = angular_to_ghz(h[0, 0] - h[1, 1]).real
    assert splitting_ghz == pytest.approx(27.99, abs=0.01)


def test_ground_hamiltonian_matches_jacobi_oracle(ground_params):
    h = build_hamiltonian(ground_params, B20)
    oracle_values, _ = jacobi_eigh(h)
    levels = diagonalize(ground_params, B20)
    scale = np.abs(oracle_values).max()
    assert np.abs(levels.energies - oracle_values).max() <= 1e-9 * scale


def test_zero_field_spectrum_matches_oracle_and_clusters(ground_params):
    h = build_hamiltonian(ground_params, FieldVector())
    oracle_values, _ = jacobi_eigh(h)
    levels = eigensolve(h, basis=basis_order(ground_params))
    scale = np.abs(oracle_values).max()
    assert np.abs(levels.energies - oracle_values).max() <= 1e-9 * scale
    # Zero-field hyperfine structure: the +-m sector pairs give 7 doublets,
    # the two m=0 combinations stay single (integer total spin).
    tol = mhz_to_angular(1e-3)
    groups = []
    for e in levels.energies:
        if groups and abs(e - groups[-1][-1]) <= tol:
            groups[-1].append(e)
        else:
            groups.append([e])
    sizes = sorted(len(g) for g in groups)
    assert sizes == [1, 1, 2, 2, 2, 2, 2, 2, 2]


def test_half_integer_spins_rejected():
    with pytest.raises(InvalidParameterError):
        SpinParams(g_par=1.0, g_perp=1.0, a_hf=0.0, b_hf=0.0, spin_s=0.3)
    with pytest.raises(InvalidParameterError):
        SpinParams(g_par=1.0, g_perp=1.0, a_hf=0.0, b_hf=0.0, spin_i=1.2)
    with pytest.raises(InvalidParameterError):
        SpinParams(g_par=np.nan, g_perp=1.0, a_hf=0.0, b_hf=0.0)


def test_hermitian_by_construction_exactly():
    rng = np.random.default_rng(11)
    for _ in range(1000):
        p = random_params(rng, spin_i=1.5)
        b = FieldVector(*rng.uniform(-0.2, 0.2, 3))
        h = build_hamiltonian(p, b)
        assert np.abs(h - h.conj().T).max() == 0.0


def test_trace_vanishes_for_every_term():
    rng = np.random.default_rng(12)
    for _ in range(50):
        p = random_params(rng)
        b = FieldVector(*rng.uniform(-0.2, 0.2, 3))
        h = build_hamiltonian(p, b)
        assert abs(np.trace(h)) <= 1e-10 * max(1.0, np.abs(h).max())


def test_basis_order_is_ms_major_descending(ground_params):
    order = basis_order(ground_params)
    assert order[0] == (0.5, 3.5)
    assert order[7] == (0.5, -3.5)
    assert order[8] == (-0.5, 3.5)
    assert order[-1] == (-0.5, -3.5)


# ---------------------------------------------------------------------------
# eigensolve
# ---------------------------------------------------------------------------


def test_eigensolve_diagonal_matrix():
    h = np.diag([3.0, -1.0, 2.0]).astype(complex)
    levels = eigensolve(h)
    assert np.allclose(levels.energies, [-1.0, 2.0, 3.0])
    # identity eigenvectors, permuted to ascending order
    expected = np.zeros((3, 3))
    expected[1, 0] = expected[2, 1] = expected[0, 2] = 1.0
    assert np.allclose(levels.states, expected)


def test_eigensolve_pauli_x():
    h = np.array([[0.0, 1.0], [1.0, 0.0]], dtype=complex)
    levels = eigensolve(h)
    assert np.allclose(levels.energies, [-1.0, 1.0])
    inv_sqrt2 = 1.0 / np.sqrt(2.0)
    assert np.allclose(np.abs(levels.states), inv_sqrt2)
    # phase gauge: first (largest-tie) component real positive
    assert levels.states[0, 0] == pytest.approx(inv_sqrt2)
    assert levels.states[1, 0] == pytest.approx(-inv_sqrt2)
    assert levels.states[1, 1] == pytest.approx(inv_sqrt2)


def test_eigensolve_rejects_non_hermitian():
    with pytest.raises(ContractViolationError):
        eigensolve(np.array([[0.0, 1.0], [0.5, 0.0]], dtype=complex))
    with pytest.raises(ContractViolationError):
        eigensolve(np.ones((2, 3)))


def test_eigensolve_unitarity_and_residual(ground_params):
    rng = np.random.default_rng(13)
    for _ in range(20):
        p = random_params(rng)
        b = FieldVector(*rng.uniform(-0.1, 0.1, 3))
        h = build_hamiltonian(p, b)
        levels = eigensolve(h, basis=basis_order(p))
        gram = levels.states.conj().T @ levels.states
        assert np.abs(gram - np.eye(p.dim)).max() <= 1e-10
        residual = h @ levels.states - levels.states * levels.energies
        assert np.abs(residual).max() <= 1e-9 * max(1.0, np.abs(h).max())
        assert np.all(np.diff(levels.energies) >= 0.0)


def test_eigensolve_gauge_is_deterministic(ground_params):
    h = build_hamiltonian(ground_params, B20)
    a = eigensolve(h)
    b = eigensolve(h.copy())
    assert np.array_equal(a.energies, b.energies)
    assert np.array_equal(a.states, b.states)
    # largest-magnitude component of every column is real positive
    for k in range(a.dim):
        pivot = a.states[np.argmax(np.abs(a.states[:, k])), k]
        assert pivot.imag == 0.0 and pivot.real > 0.0


def test_kramers_degeneracy_for_half_integer_total():
    # Odd-electron systems with integer I have half-integer total spin and
    # must stay doubly degenerate at zero field whatever the couplings.
    rng = np.random.default_rng(14)
    for spin_i in (0.0, 1.0, 3.0):
        for _ in range(10):
            p = random_params(rng, spin_i=spin_i)
            levels = diagonalize(p, FieldVector())
            pairs = levels.energies.reshape(-1, 2)
            assert np.abs(pairs[:, 1] - pairs[:, 0]).max() <= 2.0 * np.pi * 1.0  # 1 Hz


def test_energy_differences_invariant_under_global_shift(ground_params):
    h = build_hamiltonian(ground_params, B20)
    shifted = h + mhz_to_angular(123.4) * np.eye(16)
    a = eigensolve(h)
    b = eigensolve(shifted)
    assert np.allclose(np.diff(a.energies), np.diff(b.energies), rtol=0.0, atol=1e-3)


# ---------------------------------------------------------------------------
# sweeps
# ---------------------------------------------------------------------------


def test_sweep_zero_hamiltonian_is_flat():
    p = SpinParams(g_par=0.0, g_perp=0.0, a_hf=0.0, b_hf=0.0)
    sweep = sweep_levels(p, FieldVector.longitudinal(1.0), (0.0, 0.1), 11)
    assert sweep.branches.shape == (16, 11)
    assert np.all(sweep.branches == 0.0)


def test_sweep_validates_grid(ground_params):
    with pytest.raises(InvalidParameterError):
        sweep_levels(ground_params, FieldVector.longitudinal(1.0), (0.0, 0.1), 1)
    with pytest.raises(InvalidParameterError):
        sweep_levels(ground_params, FieldVector.longitudinal(1.0), (0.1, 0.0), 5)


def test_sweep_branches_continuous_against_halved_step(ground_params):
    coarse = sweep_levels(ground_params, FieldVector.longitudinal(1.0), (0.0, 0.1), 101)
    fine = sweep_levels(ground_params, FieldVector.longitudinal(1.0), (0.0, 0.1), 201)
    # same physical fields at every other fine point; branches must agree
    assert np.allclose(coarse.fields, fine.fields[::2], rtol=0.0, atol=0.0)
    diff = np.abs(coarse.branches - fine.branches[:, ::2]).max()
    assert diff <= mhz_to_angular(0.5)
    # and consecutive steps stay bounded by 10x the local slope times step
    h = coarse.fields[1] - coarse.fields[0]
    slopes = np.gradient(coarse.branches, coarse.fields, axis=1)
    steps = np.abs(np.diff(coarse.branches, axis=1))
    bound = 10.0 * np.maximum(np.abs(slopes[:, :-1]), np.abs(slopes[:, 1:])) * h
    assert np.all(steps <= bound + mhz_to_angular(0.05))


def test_clock_pair_mixing_amplitudes_at_20mT(ground_params):
    # Both clock states are near-even mixtures of |-1/2,7/2> and |1/2,5/2>.
    levels = diagonalize(ground_params, B20)
    order = basis_order(ground_params)
    row_a = order.index((-0.5, 3.5))
    row_b = order.index((0.5, 2.5))
    weight = np.abs(levels.states[[row_a, row_b], :]) ** 2
    pair = np.argsort(weight.sum(axis=0))[::-1][:2]
    for k in pair:
        assert abs(levels.states[row_a, k]) >= 0.69
        assert abs(levels.states[row_b, k]) >= 0.69


def test_track_indices_round_trip(ground_params):
    there = track_indices(ground_params, (6, 9), B20, FieldVector.longitudinal(30e-3))
    back = track_indices(
        ground_params, there, FieldVector.longitudinal(30e-3), B20
    )
    assert back == (6, 9)


# ---------------------------------------------------------------------------
# populations
# ---------------------------------------------------------------------------


def test_populations_uniform_in_high_temperature_limit(ground_params):
    levels = diagonalize(ground_params, B20)
    pops = boltzmann_populations(levels, 1e6)
    assert np.abs(pops.probabilities - 1.0 / 16.0).max() <= 1e-6


def test_populations_two_level_ratio():
    energies = np.array([0.0, kelvin_to_angular(0.05)])
    levels = LevelSet(energies=energies, states=np.eye(2, dtype=complex))
    pops = boltzmann_populations(levels, 0.05)
    assert pops.probabilities[1] / pops.probabilities[0] == pytest.approx(np.exp(-1.0), rel=1e-12)


def test_populations_normalised_and_sorted(ground_params):
    levels = diagonalize(ground_params, B20)
    for t in (0.05, 0.25, 1.0):
        pops = boltzmann_populations(levels, t)
        assert pops.probabilities.sum() == pytest.approx(1.0, abs=1e-12)
        assert np.all(np.diff(pops.probabilities) <= 1e-15)


def test_populations_lowest_doublet_fraction_at_100mK(ground_params):
    # Direct Boltzmann sum over oracle eigenvalues.  At 0.1 K the thermal
    # energy (k_B T / h ~ 2.08 GHz) spans the whole 16-level manifold, so
    # the lowest two levels hold only ~22% of the population.
    h = build_hamiltonian(ground_params, B20)
    oracle_values, _ = jacobi_eigh(h)
    weights = np.exp(-HBAR * (oracle_values - oracle_values.min()) / (K_B * 0.1))
    expected = weights[:2].sum() / weights.sum()
    pops = boltzmann_populations(diagonalize(ground_params, B20), 0.1)
    assert pops.probabilities[:2].sum() == pytest.approx(expected, rel=1e-9)
    assert expected == pytest.approx(0.2202, abs=2e-3)


def test_populations_reject_nonpositive_temperature(ground_params):
    levels = diagonalize(ground_params, B20)
    with pytest.raises(InvalidParameterError):
        boltzmann_populations(levels, 0.0)
    with pytest.raises(InvalidParameterError):
        boltzmann_populations(levels, -1.0)

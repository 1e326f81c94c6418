"""EIT susceptibility, heterodyne (OVNA) observables and polariton numbers.

The three-level susceptibility for probe detuning d_ge and coupling
detuning d_se reads

    chi = i S * G_ge (G_sg + i(d_ge - d_se))
          / [ (G_ge + i d_ge)(G_sg + i(d_ge - d_se)) + |W_c/2|^2 ]

with half-rates G_ge = Gamma_opt/2 and G_sg = Gamma_HF/2 and a single real
amplitude scale S (the resonant optical depth).  The sideband-heterodyne
readout maps chi onto the measured amplitude and phase as

    amplitude ~ sqrt(1 + Im[chi]^2 + 2 Im[chi] cos(Re[chi])^2)
    phase     ~ -Im[chi] sin(Re[chi]) / (1 + Im[chi] cos(Re[chi]))

up to per-channel gain and offset, which stay explicit fit parameters.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InvalidParameterError, PhaseSingularityError
from .units import C_LIGHT, EPSILON_0, HBAR, TWO_PI


@dataclass(frozen=True)
class EitLineParams:
    """Rates of the Lambda line in half-width form.

    ``gamma_ge`` and ``gamma_sg`` are the model half-rates; construct from
    measured FWHM values with :meth:`from_fwhm` so the factor of two lives
    in exactly one place.  ``alpha0l`` is the resonant optical depth scale
    multiplying the susceptibility; ``wavelength`` is kept for bookkeeping.
    """

    gamma_ge: float  # rad/s
    gamma_sg: float  # rad/s
    omega_c: float  # rad/s
    alpha0l: float = 1.0
    wavelength: float = 1.5305e-6  # m

    def __post_init__(self):
        if self.gamma_ge <= 0.0 or self.gamma_sg <= 0.0:
            raise InvalidParameterError("both decay rates must be positive")
        if self.omega_c < 0.0:
            raise InvalidParameterError("omega_c must be non-negative")
        if self.alpha0l < 0.0:
            raise InvalidParameterError("alpha0l must be non-negative")

    @classmethod
    def from_fwhm(
        cls,
        gamma_opt: float,
        gamma_hf: float,
        omega_c: float,
        alpha0l: float = 1.0,
        wavelength: float = 1.5305e-6,
    ) -> "EitLineParams":
        """Build from FWHM linewidths: gamma_ge(sg) = Gamma_opt(HF) / 2."""
        return cls(
            gamma_ge=0.5 * gamma_opt,
            gamma_sg=0.5 * gamma_hf,
            omega_c=omega_c,
            alpha0l=alpha0l,
            wavelength=wavelength,
        )

    @property
    def gamma_opt(self) -> float:
        return 2.0 * self.gamma_ge

    @property
    def gamma_hf(self) -> float:
        return 2.0 * self.gamma_sg


@dataclass(frozen=True)
class PolaritonParams:
    """Inputs of the collective-coupling and polariton-delay estimates."""

    dipole_moment: float  # C m
    atom_density: float  # m^-3
    optical_angular_frequency: float  # rad/s
    crystal_length: float  # m

    def __post_init__(self):
        for name in ("dipole_moment", "atom_density", "optical_angular_frequency", "crystal_length"):
            if getattr(self, name) <= 0.0:
                raise InvalidParameterError(f"{name} must be positive")


def susceptibility(p: EitLineParams, delta_ge, delta_se):
    """Complex susceptibility at probe/coupling detunings (rad/s).

    Vectorised over ``delta_ge`` and ``delta_se``.
    """
    delta_ge = np.asarray(delta_ge, dtype=float)
    two_photon = p.gamma_sg + 1j * (delta_ge - np.asarray(delta_se, dtype=float))
    numerator = p.gamma_ge * two_photon
    denominator = (p.gamma_ge + 1j * delta_ge) * two_photon + abs(0.5 * p.omega_c) ** 2
    chi = 1j * p.alpha0l * numerator / denominator
    return chi if chi.ndim else complex(chi)


def ovna_amplitude(chi):
    """Heterodyne amplitude readout of chi (dimensionless, gain not applied)."""
    chi = np.asarray(chi, dtype=complex)
    im, re = chi.imag, chi.real
    value = np.sqrt(1.0 + im**2 + 2.0 * im * np.cos(re) ** 2)
    return value if value.ndim else float(value)


def ovna_phase(chi):
    """Heterodyne phase readout of chi in radians (gain not applied).

    Raises PhaseSingularityError when the denominator comes within 1e-12 of
    zero anywhere; the singularity is flagged, never clipped.
    """
    chi = np.asarray(chi, dtype=complex)
    im, re = chi.imag, chi.real
    denominator = 1.0 + im * np.cos(re)
    if np.any(np.abs(denominator) < 1e-12):
        raise PhaseSingularityError("phase readout denominator within 1e-12 of zero")
    value = -im * np.sin(re) / denominator
    return value if value.ndim else float(value)


def eit_width(gamma_opt: float, gamma_hf: float, omega_c: float) -> float:
    """Transparency-window FWHM: Gamma_HF (1 + W_c^2 / (Gamma_opt Gamma_HF))."""
    if gamma_opt <= 0.0 or gamma_hf <= 0.0:
        raise InvalidParameterError("linewidths must be positive")
    return gamma_hf + omega_c**2 / gamma_opt


def eit_visibility(gamma_opt: float, gamma_hf: float, omega_c: float) -> float:
    """Transparency dip contrast: W_c^2 / (W_c^2 + Gamma_opt Gamma_HF)."""
    if gamma_opt <= 0.0 or gamma_hf <= 0.0:
        raise InvalidParameterError("linewidths must be positive")
    w2 = omega_c**2
    return w2 / (w2 + gamma_opt * gamma_hf)


def collective_coupling(p: PolaritonParams) -> float:
    """Collective light-ion coupling g sqrt(N) = mu sqrt(w n / (2 hbar eps0))."""
    return p.dipole_moment * np.sqrt(
        p.optical_angular_frequency * p.atom_density / (2.0 * HBAR * EPSILON_0)
    )


def collective_coupling_rate(
    dipole_moment: float, atom_density: float, optical_angular_frequency: float
) -> float:
    """Same as :func:`collective_coupling` without the length bookkeeping."""
    if atom_density == 0.0:
        return 0.0
    return dipole_moment * np.sqrt(
        optical_angular_frequency * atom_density / (2.0 * HBAR * EPSILON_0)
    )


def mixing_angle(g_sqrt_n: float, omega_c: float) -> float:
    """Polariton mixing angle theta = arctan(g^2 N / W_c^2), in degrees."""
    if omega_c == 0.0:
        return 90.0 if g_sqrt_n > 0.0 else 0.0
    return float(np.degrees(np.arctan((g_sqrt_n / omega_c) ** 2)))


def group_delay(p: PolaritonParams, gamma_opt: float, gamma_hf: float) -> float:
    """Polariton propagation delay (L/c) g^2 N / (Gamma_opt Gamma_HF), seconds."""
    if gamma_opt <= 0.0 or gamma_hf <= 0.0:
        raise InvalidParameterError("linewidths must be positive")
    g2n = collective_coupling(p) ** 2
    return (p.crystal_length / C_LIGHT) * g2n / (gamma_opt * gamma_hf)


def group_delay_from_phase(trace) -> np.ndarray:
    """Group delay d(phase)/d(omega) of a trace, seconds per point.

    The phase column is unwrapped (standard +-pi jump removal) and
    differentiated by centred differences on the angular frequency axis.
    """
    omega = TWO_PI * np.asarray(trace.frequency, dtype=float)
    phase = np.unwrap(np.asarray(trace.phase_rad, dtype=float))
    if omega.size < 2:
        raise InvalidParameterError("need at least two points to differentiate")
    return np.gradient(phase, omega)

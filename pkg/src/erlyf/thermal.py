"""Spin-line broadening by non-equilibrium phonons and the effective
sample temperature.

Resonant phonons bottlenecked at the spin frequency broaden the line as

    Gamma_NQP = (sigma v / pi) (2 w^2 dw / (2 pi v^3)) coth(hbar w / k_B T)^2

whose dimensionless strength sigma w^2 / (pi^2 v^2) is the coefficient
gamma_NQP used in the fitted form

    Gamma_HF(T) = Gamma_HF0 [1 + gamma_NQP coth(hbar w / k_B T_eff)^2],
    T_eff = T_min sqrt(1 + T / T_min).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InvalidParameterError
from .units import HBAR, K_B


def coth(x):
    """Hyperbolic cotangent, accurate down to x ~ 1e-6 and beyond."""
    x = np.asarray(x, dtype=float)
    value = 1.0 / np.tanh(x)
    return value if value.ndim else float(value)


@dataclass(frozen=True)
class NqpParams:
    """Phonon-bottleneck model constants.

    ``gamma_nqp`` may be supplied directly (the fitted route); when left
    ``None`` it is derived from the raw constants sigma, v_sound and
    omega_spin (the first-principles route).  Both are exposed because the
    printed prefactors and the fitted coefficient are not mutually
    consistent for this crystal.
    """

    sigma: float = 1e-16  # m^2, phonon collision cross-section
    v_sound: float = 5.5e3  # m/s
    omega_spin: float = 6.5345e9  # rad/s, i.e. hbar*omega/k_B ~ 0.05 K
    gamma_hf0: float = 0.0  # rad/s, FWHM floor
    gamma_nqp: float | None = None  # dimensionless
    t_min: float = 0.5  # K

    def __post_init__(self):
        if self.sigma <= 0.0 or self.v_sound <= 0.0 or self.t_min <= 0.0:
            raise InvalidParameterError("sigma, v_sound and t_min must be positive")
        if self.omega_spin <= 0.0:
            raise InvalidParameterError("omega_spin must be positive")
        if self.gamma_nqp is not None and self.gamma_nqp < 0.0:
            raise InvalidParameterError("gamma_nqp must be non-negative")

    @property
    def gamma_nqp_raw(self) -> float:
        """sigma w^2 / (pi^2 v^2), the coefficient the raw constants imply."""
        return self.sigma * self.omega_spin**2 / (np.pi**2 * self.v_sound**2)

    @property
    def gamma_nqp_effective(self) -> float:
        """The fitted coefficient when given, else the raw-constant one."""
        return self.gamma_nqp if self.gamma_nqp is not None else self.gamma_nqp_raw

    @property
    def hbar_omega_over_kb(self) -> float:
        """Spin quantum expressed as a temperature (K)."""
        return HBAR * self.omega_spin / K_B


def effective_temperature(t: float | np.ndarray, t_min: float):
    """Spin-ensemble temperature T_eff = T_min sqrt(1 + T/T_min)."""
    if t_min <= 0.0:
        raise InvalidParameterError("t_min must be positive")
    t = np.asarray(t, dtype=float)
    if np.any(t < 0.0):
        raise InvalidParameterError("temperature must be non-negative")
    value = t_min * np.sqrt(1.0 + t / t_min)
    return value if value.ndim else float(value)


def nqp_broadening(p: NqpParams, temperature: float, delta_omega: float):
    """Line broadening from non-equilibrium phonons at lattice temperature T.

    ``delta_omega`` is the spin linewidth feeding the phonon bath (rad/s).
    """
    temperature = np.asarray(temperature, dtype=float)
    if np.any(temperature <= 0.0):
        raise InvalidParameterError("temperature must be positive")
    prefactor = (p.sigma * p.v_sound / np.pi) * (
        2.0 * p.omega_spin**2 * delta_omega / (2.0 * np.pi * p.v_sound**3)
    )
    value = np.asarray(prefactor * coth(p.hbar_omega_over_kb / temperature) ** 2)
    return value if value.ndim else float(value)


def gamma_hf_vs_temperature(p: NqpParams, temperature: float | np.ndarray):
    """Spin FWHM vs cryostat temperature through the bottleneck model.

    Uses the effective sample temperature, so the curve saturates towards
    Gamma_HF0 (1 + gamma_NQP coth(hw / k_B T_min)^2) as T -> 0.
    """
    temperature = np.asarray(temperature, dtype=float)
    if np.any(temperature < 0.0):
        raise InvalidParameterError("temperature must be non-negative")
    t_eff = effective_temperature(temperature, p.t_min)
    factor = p.gamma_nqp_effective * coth(p.hbar_omega_over_kb / t_eff) ** 2
    value = np.asarray(p.gamma_hf0 * (1.0 + factor))
    return value if value.ndim else float(value)

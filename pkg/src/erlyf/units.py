"""Physical constants and the single unit-conversion layer.

All model code works in internal units of

* angular frequency (rad/s) for every energy, rate, width and detuning,
* tesla for magnetic fields,
* kelvin, metres, seconds otherwise.

File formats and the command line speak linear MHz/GHz, mT and ns.  Every
conversion between the two worlds lives in this module so that stray 2*pi,
milli and mega factors cannot drift apart between modules.
"""

from __future__ import annotations

import math

from scipy.constants import (
    Boltzmann as K_B,
    c as C_LIGHT,
    epsilon_0 as EPSILON_0,
    hbar as HBAR,
    physical_constants,
)

MU_B = physical_constants["Bohr magneton"][0]  # J/T
#: Electron Zeeman prefactor: mu_B * B is an energy, divide by hbar for rad/s.
MU_B_OVER_HBAR = MU_B / HBAR  # (rad/s)/T

TWO_PI = 2.0 * math.pi


def hz_to_angular(f):
    return TWO_PI * f


def angular_to_hz(w):
    return w / TWO_PI


def mhz_to_angular(f_mhz):
    return TWO_PI * 1e6 * f_mhz


def angular_to_mhz(w):
    return w / (TWO_PI * 1e6)


def ghz_to_angular(f_ghz):
    return TWO_PI * 1e9 * f_ghz


def angular_to_ghz(w):
    return w / (TWO_PI * 1e9)


def thz_to_angular(f_thz):
    return TWO_PI * 1e12 * f_thz


def mt_to_tesla(b_mt):
    return 1e-3 * b_mt


def tesla_to_mt(b_t):
    return 1e3 * b_t


def mhz_per_mt2_to_si(s2):
    """MHz/mT^2 (linear frequency) -> (rad/s)/T^2."""
    return TWO_PI * 1e6 * s2 / 1e-6


def si_to_mhz_per_mt2(s2):
    return s2 * 1e-6 / (TWO_PI * 1e6)


def mhz_per_mt_to_si(s1):
    """MHz/mT (linear frequency) -> (rad/s)/T."""
    return TWO_PI * 1e6 * s1 / 1e-3


def si_to_mhz_per_mt(s1):
    return s1 * 1e-3 / (TWO_PI * 1e6)


def s_to_ns(t):
    return 1e9 * t


def ns_to_s(t):
    return 1e-9 * t


def kelvin_to_angular(t_kelvin):
    """Thermal energy k_B*T expressed as an angular frequency."""
    return K_B * t_kelvin / HBAR


__all__ = [
    "C_LIGHT",
    "EPSILON_0",
    "HBAR",
    "K_B",
    "MU_B",
    "MU_B_OVER_HBAR",
    "TWO_PI",
    "angular_to_ghz",
    "angular_to_hz",
    "angular_to_mhz",
    "ghz_to_angular",
    "hz_to_angular",
    "kelvin_to_angular",
    "mhz_per_mt2_to_si",
    "mhz_per_mt_to_si",
    "mhz_to_angular",
    "mt_to_tesla",
    "ns_to_s",
    "s_to_ns",
    "si_to_mhz_per_mt",
    "si_to_mhz_per_mt2",
    "tesla_to_mt",
    "thz_to_angular",
]

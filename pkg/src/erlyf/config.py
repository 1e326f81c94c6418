"""Crystal and experiment configuration.

The on-disk format is sectioned ``key = value`` text with the unit spelled
out in every key name (``A_MHz``, ``seed_mT``); no unit inference happens
anywhere.  Values are kept verbatim in their file units so that a
write/read round trip is lossless; accessor methods perform the single
conversion into internal (angular/SI) units.
"""

from __future__ import annotations

import configparser
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

from .eit import EitLineParams, PolaritonParams
from .errors import ConfigError
from .spin import SpinParams
from .thermal import NqpParams
from .transitions import SpinWidthModel
from .units import (
    C_LIGHT,
    kelvin_to_angular,
    mhz_per_mt2_to_si,
    mhz_to_angular,
    mt_to_tesla,
    thz_to_angular,
)

# section -> key -> default (type taken from the default's type)
SCHEMA: dict[str, dict[str, object]] = {
    "ground": {
        "g_par": 3.137,
        "g_perp": 8.105,
        "A_MHz": -325.8,
        "B_MHz": 840.0,
        "P_MHz": 0.0,
        "S": 0.5,
        "I": 3.5,
    },
    "excited": {
        "g_par": 1.56,
        "g_perp": 0.0,
        "A_MHz": -170.0,
        "B_MHz": 970.0,
        "P_MHz": 15.0,
        "S": 0.5,
        "I": 3.5,
    },
    "optics": {
        "origin_THz": 195.888,
        "length_mm": 5.0,
        "density_per_cm3": 7.0e15,
        "dipole_Cm": 2.5e-32,
    },
    "eit": {
        "gamma_opt_MHz": 33.6,
        "gamma_hf_MHz": 4.5,
        "omega_c_MHz": 15.0,
        "alpha0l": 1.4,
        "couple_detuning_MHz": 0.0,
        "aux_depth": 0.21,
        "aux_offset_MHz": -90.0,
        "aux_fwhm_MHz": 28.0,
    },
    "spinwidth": {
        "gamma_hf0_MHz": 4.5,
        "delta_b_noise_mT": 0.4,
        "s2_MHz_per_mT2": 0.91,
    },
    "thermal": {
        "sigma_nm2": 100.0,
        "v_sound_km_s": 5.5,
        "hbar_omega_over_kb_K": 0.05,
        "gamma_nqp": 2.0e-3,
        "t_min_K": 0.5,
        "gamma_hf0_MHz": 6.4,
    },
    "lineshape": {
        "shape": "lorentzian",
        "fwhm_MHz": 32.0,
        "peak_depth": 1.4,
    },
    "zefoz": {
        "seed_mT": 15.0,
        "fd_step_mT": 0.01,
        "grad_tol_rad_per_s_per_T": 1.0e3,
        "max_iter": 60,
    },
    "lambda": {
        "asymmetry_tol": 0.05,
        "isolation_tol": 0.1,
        "temperature_K": 0.25,
    },
    "grids": {
        "levels_b_min_mT": 0.0,
        "levels_b_max_mT": 100.0,
        "levels_points": 201,
        "eit_span_MHz": 150.0,
        "eit_points": 601,
    },
    "noise": {
        "sigma_amp": 0.02,
        "sigma_phase_rad": 0.02,
        "seed": 12345,
    },
}


@dataclass(frozen=True)
class CrystalConfig:
    """Parsed configuration; ``values[section][key]`` keeps file units."""

    values: dict[str, dict[str, object]] = field(default_factory=dict)

    # -- raw access ------------------------------------------------------
    def get(self, section: str, key: str):
        return self.values[section][key]

    def replaced(self, section: str, key: str, value) -> "CrystalConfig":
        """A copy with one value overridden (used for flag precedence)."""
        if section not in SCHEMA or key not in SCHEMA[section]:
            raise ConfigError(f"unknown configuration key [{section}] {key}")
        values = {s: dict(kv) for s, kv in self.values.items()}
        values[section][key] = _coerce(section, key, value)
        return CrystalConfig(values)

    # -- physics accessors (single conversion layer lives in units.py) ---
    def _spin_params(self, section: str) -> SpinParams:
        sec = self.values[section]
        return SpinParams(
            g_par=sec["g_par"],
            g_perp=sec["g_perp"],
            a_hf=mhz_to_angular(sec["A_MHz"]),
            b_hf=mhz_to_angular(sec["B_MHz"]),
            p_quad=mhz_to_angular(sec["P_MHz"]),
            spin_s=sec["S"],
            spin_i=sec["I"],
        )

    def ground_params(self) -> SpinParams:
        return self._spin_params("ground")

    def excited_params(self) -> SpinParams:
        return self._spin_params("excited")

    def optical_origin_angular(self) -> float:
        return thz_to_angular(self.values["optics"]["origin_THz"])

    def wavelength_m(self) -> float:
        return C_LIGHT / (self.values["optics"]["origin_THz"] * 1e12)

    def polariton_params(self) -> PolaritonParams:
        opt = self.values["optics"]
        return PolaritonParams(
            dipole_moment=opt["dipole_Cm"],
            atom_density=opt["density_per_cm3"] * 1e6,
            optical_angular_frequency=self.optical_origin_angular(),
            crystal_length=opt["length_mm"] * 1e-3,
        )

    def eit_line_params(self) -> EitLineParams:
        sec = self.values["eit"]
        return EitLineParams.from_fwhm(
            gamma_opt=mhz_to_angular(sec["gamma_opt_MHz"]),
            gamma_hf=mhz_to_angular(sec["gamma_hf_MHz"]),
            omega_c=mhz_to_angular(sec["omega_c_MHz"]),
            alpha0l=sec["alpha0l"],
            wavelength=self.wavelength_m(),
        )

    def trace_model_params(self) -> dict[str, float]:
        """Generator/fit parameter map for the bundled trace model."""
        sec = self.values["eit"]
        return {
            "gamma_opt": mhz_to_angular(sec["gamma_opt_MHz"]),
            "gamma_hf": mhz_to_angular(sec["gamma_hf_MHz"]),
            "omega_c": mhz_to_angular(sec["omega_c_MHz"]),
            "alpha0l": sec["alpha0l"],
            "probe_center": 0.0,
            "couple_detuning": mhz_to_angular(sec["couple_detuning_MHz"]),
            "aux_depth": sec["aux_depth"],
            "aux_center": sec["aux_offset_MHz"] * 1e6,
            "aux_fwhm": mhz_to_angular(sec["aux_fwhm_MHz"]),
            "amp_gain": 1.0,
            "phase_gain": 1.0,
            "phase_offset": 0.0,
        }

    def nqp_params(self) -> NqpParams:
        sec = self.values["thermal"]
        return NqpParams(
            sigma=sec["sigma_nm2"] * 1e-18,
            v_sound=sec["v_sound_km_s"] * 1e3,
            omega_spin=kelvin_to_angular(sec["hbar_omega_over_kb_K"]),
            gamma_hf0=mhz_to_angular(sec["gamma_hf0_MHz"]),
            gamma_nqp=sec["gamma_nqp"],
            t_min=sec["t_min_K"],
        )

    def spin_width_model(self) -> SpinWidthModel:
        sec = self.values["spinwidth"]
        return SpinWidthModel(
            gamma_hf0=mhz_to_angular(sec["gamma_hf0_MHz"]),
            delta_b_noise=mt_to_tesla(sec["delta_b_noise_mT"]),
            s2=mhz_per_mt2_to_si(sec["s2_MHz_per_mT2"]),
        )

    def zefoz_seed_tesla(self) -> float:
        return mt_to_tesla(self.values["zefoz"]["seed_mT"])


def default_config() -> CrystalConfig:
    """The bundled 167Er:LiYF4 parameter set."""
    return CrystalConfig({s: dict(kv) for s, kv in SCHEMA.items()})


def _coerce(section: str, key: str, raw):
    default = SCHEMA[section][key]
    if isinstance(default, str):
        return str(raw)
    if isinstance(default, int) and not isinstance(default, bool) and not isinstance(default, float):
        try:
            return int(str(raw))
        except ValueError as exc:
            raise ConfigError(f"[{section}] {key}: expected an integer, got {raw!r}") from exc
    try:
        return float(raw)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"[{section}] {key}: expected a number, got {raw!r}") from exc


def load_config(path=None) -> CrystalConfig:
    """Read a configuration file; omitted keys fall back to the defaults.

    Unknown sections or keys are rejected by name: silent typos in a unit
    suffix are exactly the failure mode this format exists to prevent.
    """
    config = default_config()
    if path is None:
        return config
    parser = configparser.ConfigParser(interpolation=None)
    try:
        with open(path, "r", encoding="utf-8") as fh:
            parser.read_file(fh)
    except OSError:
        raise
    except configparser.Error as exc:
        raise ConfigError(f"{path}: {exc}") from exc
    values = {s: dict(kv) for s, kv in config.values.items()}
    for section in parser.sections():
        if section not in SCHEMA:
            raise ConfigError(f"{path}: unknown section [{section}]")
        for key, raw in parser.items(section):
            schema_key = _match_key(section, key)
            if schema_key is None:
                raise ConfigError(f"{path}: unknown key {key!r} in section [{section}]")
            values[section][schema_key] = _coerce(section, schema_key, raw)
    return CrystalConfig(values)


def _match_key(section: str, key: str):
    # configparser lowercases keys; schema keys carry case for readability.
    for candidate in SCHEMA[section]:
        if candidate.lower() == key.lower():
            return candidate
    return None


def write_config(config: CrystalConfig, path) -> None:
    """Write every section/key in schema order (lossless round trip)."""
    lines = []
    for section, keys in SCHEMA.items():
        lines.append(f"[{section}]")
        for key in keys:
            value = config.values[section][key]
            text = value if isinstance(value, str) else repr(value)
            lines.append(f"{key} = {text}")
        lines.append("")
    Path(path).write_text("\n".join(lines), encoding="utf-8", newline="\n")


def bundled_config_path() -> Path:
    """Path of the installed example configuration file."""
    return Path(resources.files("erlyf").joinpath("data/er167_lyf.cfg"))


def parse_init_file(path) -> dict[str, float]:
    """Flat ``key = value`` file with optional [init] section header."""
    result: dict[str, float] = {}
    for raw_line in Path(path).read_text(encoding="utf-8").splitlines():
        line = raw_line.split("#", 1)[0].strip()
        if not line or line.startswith("["):
            continue
        if "=" not in line:
            raise ConfigError(f"{path}: malformed line {raw_line!r}")
        key, _, value = line.partition("=")
        try:
            result[key.strip()] = float(value.strip())
        except ValueError as exc:
            raise ConfigError(f"{path}: non-numeric value in {raw_line!r}") from exc
    return result

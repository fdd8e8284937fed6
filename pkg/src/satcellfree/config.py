"""Scenario configuration and its JSON file format.

The on-disk format is a nested JSON document carrying a ``schema_version``
field. Powers are in watts, gains and noise figures in dB/dBi, lengths in
the unit named by each field. Geometry is specified through positions, so
no angle enters the file; derived angles are radians throughout.
"""

from __future__ import annotations

import dataclasses
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Sequence

import numpy as np

SCHEMA_VERSION = 1
SPEED_OF_LIGHT = 299_792_458.0  # m/s
THERMAL_NOISE_DBM_PER_HZ = -174.0


class ConfigError(ValueError):
    """Raised for a configuration that violates a scenario invariant."""


def db2lin(x):
    return 10.0 ** (np.asarray(x, dtype=float) / 10.0)


def lin2db(x):
    return 10.0 * np.log10(np.asarray(x, dtype=float))


def dbw_to_watt(x: float) -> float:
    return float(10.0 ** (x / 10.0))


def aperture_radius_for_gain(gain_dbi: float, wavelength: float) -> float:
    """Radius of a uniform circular aperture with boresight gain ``gain_dbi``.

    Uses the ideal aperture directivity ``(2 pi a / lambda)^2``.
    """
    return wavelength * math.sqrt(10.0 ** (gain_dbi / 10.0)) / (2.0 * math.pi)


@dataclass(frozen=True)
class ScenarioConfig:
    """All deployment, channel, power and solver parameters.

    Defaults reproduce the rural deployment with 40 APs, a 10x10 satellite
    array at (300, 300, 400) km and 20 users. Parameters the deployment
    description leaves open (Rician factor, correlation coefficient,
    satellite shadowing, heights, pilot power) are ordinary defaults here.
    """

    num_aps: int = 40
    num_users: int = 20
    sat_array: tuple[int, int] = (10, 10)
    area_side_km: float = math.sqrt(20.0)
    sat_position_km: tuple[float, float, float] = (300.0, 300.0, 400.0)
    ap_height_m: float = 10.0
    user_height_m: float = 1.5
    carrier_freq_ghz: float = 20.0
    bandwidth_mhz: float = 100.0
    coherence_block: int = 5000
    max_power_w: float | tuple[float, ...] = dbw_to_watt(5.0)
    # None -> same as the per-user max data power
    pilot_power_w: float | None = None
    noise_figure_ap_db: float = 7.0
    noise_figure_sat_db: float = 1.2
    gain_ap_dbi: float = 5.0
    gain_user_dbi: float = 5.0
    gain_sat_dbi: float = 26.9
    rician_factor: float | tuple[float, ...] = 10.0
    # in wavelengths
    antenna_spacing: tuple[float, float] = (0.5, 0.5)
    # None -> solved from gain_sat_dbi at the carrier
    aperture_radius_m: float | None = None
    shadow_std_terrestrial_db: float = 8.0
    shadow_std_sat_db: float = 2.0
    correlation_coeff: float = 0.5
    # None -> beam points at the area centroid (x, y, 0) in km
    beam_center_km: tuple[float, float, float] | None = None
    rng_seed: int = 0
    inner_tol: float = 1e-6
    # absolute outer bisection tolerance; None -> outer_tol_rel * xi_up
    outer_tol: float | None = None
    outer_tol_rel: float = 1e-3
    max_inner_iter: int = 10_000

    def __post_init__(self):
        # normalise list-valued fields coming from JSON
        for name in ("sat_array", "sat_position_km", "antenna_spacing", "beam_center_km"):
            val = getattr(self, name)
            if val is not None and not isinstance(val, tuple):
                object.__setattr__(self, name, tuple(val))
        for name in ("max_power_w", "rician_factor"):
            val = getattr(self, name)
            if isinstance(val, (list, np.ndarray)):
                object.__setattr__(self, name, tuple(float(v) for v in val))
        self._validate()

    def _validate(self):
        if self.num_aps < 1 or self.num_users < 1:
            raise ConfigError("num_aps and num_users must be >= 1")
        if len(self.sat_array) != 2 or min(self.sat_array) < 1:
            raise ConfigError("sat_array must be two counts >= 1")
        if self.coherence_block <= self.num_users:
            raise ConfigError("coherence_block must exceed num_users")
        if self.area_side_km <= 0:
            raise ConfigError("area_side_km must be positive")
        if self.carrier_freq_ghz <= 0 or self.bandwidth_mhz <= 0:
            raise ConfigError("carrier frequency and bandwidth must be positive")
        if np.any(self.max_power_vector() < 0):
            raise ConfigError("max_power_w must be >= 0")
        if self.pilot_power_w is not None and self.pilot_power_w < 0:
            raise ConfigError("pilot_power_w must be >= 0")
        if np.any(self.rician_vector() < 0):
            raise ConfigError("rician_factor must be >= 0")
        if not 0.0 <= self.correlation_coeff < 1.0:
            raise ConfigError("correlation_coeff must lie in [0, 1)")
        if self.shadow_std_terrestrial_db < 0 or self.shadow_std_sat_db < 0:
            raise ConfigError("shadowing standard deviations must be >= 0")
        if self.inner_tol <= 0 or self.outer_tol_rel <= 0:
            raise ConfigError("solver tolerances must be positive")
        if self.outer_tol is not None and self.outer_tol <= 0:
            raise ConfigError("outer_tol must be positive")
        if self.max_inner_iter < 1:
            raise ConfigError("max_inner_iter must be >= 1")

    # -- derived quantities -------------------------------------------------

    @property
    def num_sat_antennas(self) -> int:
        return self.sat_array[0] * self.sat_array[1]

    @property
    def wavelength_m(self) -> float:
        return SPEED_OF_LIGHT / (self.carrier_freq_ghz * 1e9)

    @property
    def aperture_radius(self) -> float:
        if self.aperture_radius_m is not None:
            return self.aperture_radius_m
        return aperture_radius_for_gain(self.gain_sat_dbi, self.wavelength_m)

    @property
    def beam_center(self) -> tuple[float, float, float]:
        if self.beam_center_km is not None:
            return self.beam_center_km
        half = self.area_side_km / 2.0
        return (half, half, 0.0)

    @property
    def pilot_power(self) -> float:
        if self.pilot_power_w is not None:
            return float(self.pilot_power_w)
        return float(self.max_power_vector().max())

    @property
    def prelog(self) -> float:
        return 1.0 - self.num_users / self.coherence_block

    @property
    def noise_power_ap(self) -> float:
        return noise_power_w(self.bandwidth_mhz, self.noise_figure_ap_db)

    @property
    def noise_power_sat(self) -> float:
        return noise_power_w(self.bandwidth_mhz, self.noise_figure_sat_db)

    def max_power_vector(self) -> np.ndarray:
        return _per_user(self.max_power_w, self.num_users, "max_power_w")

    def rician_vector(self) -> np.ndarray:
        return _per_user(self.rician_factor, self.num_users, "rician_factor")

    def replace(self, **changes) -> "ScenarioConfig":
        return dataclasses.replace(self, **changes)

    # -- serialisation ------------------------------------------------------

    def to_dict(self) -> dict[str, Any]:
        return {
            "schema_version": SCHEMA_VERSION,
            "deployment": {
                "num_aps": self.num_aps,
                "num_users": self.num_users,
                "area_side_km": self.area_side_km,
                "ap_height_m": self.ap_height_m,
                "user_height_m": self.user_height_m,
            },
            "satellite": {
                "position_km": list(self.sat_position_km),
                "array": list(self.sat_array),
                "antenna_spacing_wavelengths": list(self.antenna_spacing),
                "aperture_radius_m": self.aperture_radius_m,
                "beam_center_km": None if self.beam_center_km is None else list(self.beam_center_km),
                "gain_dbi": self.gain_sat_dbi,
                "noise_figure_db": self.noise_figure_sat_db,
            },
            "terrestrial": {
                "gain_ap_dbi": self.gain_ap_dbi,
                "noise_figure_db": self.noise_figure_ap_db,
            },
            "radio": {
                "carrier_freq_ghz": self.carrier_freq_ghz,
                "bandwidth_mhz": self.bandwidth_mhz,
                "coherence_block": self.coherence_block,
                "gain_user_dbi": self.gain_user_dbi,
            },
            "power": {
                "max_power_w": _to_json_scalar_or_list(self.max_power_w),
                "pilot_power_w": self.pilot_power_w,
            },
            "channel": {
                "rician_factor": _to_json_scalar_or_list(self.rician_factor),
                "correlation_coeff": self.correlation_coeff,
                "shadow_std_terrestrial_db": self.shadow_std_terrestrial_db,
                "shadow_std_sat_db": self.shadow_std_sat_db,
            },
            "solver": {
                "inner_tol": self.inner_tol,
                "outer_tol": self.outer_tol,
                "outer_tol_rel": self.outer_tol_rel,
                "max_inner_iter": self.max_inner_iter,
            },
            "rng_seed": self.rng_seed,
        }

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> "ScenarioConfig":
        version = data.get("schema_version")
        if version != SCHEMA_VERSION:
            raise ConfigError(f"unsupported schema_version {version!r} (expected {SCHEMA_VERSION})")
        kwargs: dict[str, Any] = {}
        for section, keys in _FILE_LAYOUT.items():
            block = data.get(section, {}) if section else data
            if not isinstance(block, dict):
                raise ConfigError(f"section {section!r} must be a mapping")
            for file_key, attr in keys.items():
                if file_key in block:
                    kwargs[attr] = block[file_key]
        unknown = set(data) - set(_FILE_LAYOUT) - {"schema_version", "rng_seed"}
        if unknown:
            raise ConfigError(f"unknown config sections: {sorted(unknown)}")
        if "rng_seed" in data:
            kwargs["rng_seed"] = int(data["rng_seed"])
        return cls(**kwargs)


_FILE_LAYOUT: dict[str, dict[str, str]] = {
    "deployment": {
        "num_aps": "num_aps",
        "num_users": "num_users",
        "area_side_km": "area_side_km",
        "ap_height_m": "ap_height_m",
        "user_height_m": "user_height_m",
    },
    "satellite": {
        "position_km": "sat_position_km",
        "array": "sat_array",
        "antenna_spacing_wavelengths": "antenna_spacing",
        "aperture_radius_m": "aperture_radius_m",
        "beam_center_km": "beam_center_km",
        "gain_dbi": "gain_sat_dbi",
        "noise_figure_db": "noise_figure_sat_db",
    },
    "terrestrial": {
        "gain_ap_dbi": "gain_ap_dbi",
        "noise_figure_db": "noise_figure_ap_db",
    },
    "radio": {
        "carrier_freq_ghz": "carrier_freq_ghz",
        "bandwidth_mhz": "bandwidth_mhz",
        "coherence_block": "coherence_block",
        "gain_user_dbi": "gain_user_dbi",
    },
    "power": {
        "max_power_w": "max_power_w",
        "pilot_power_w": "pilot_power_w",
    },
    "channel": {
        "rician_factor": "rician_factor",
        "correlation_coeff": "correlation_coeff",
        "shadow_std_terrestrial_db": "shadow_std_terrestrial_db",
        "shadow_std_sat_db": "shadow_std_sat_db",
    },
    "solver": {
        "inner_tol": "inner_tol",
        "outer_tol": "outer_tol",
        "outer_tol_rel": "outer_tol_rel",
        "max_inner_iter": "max_inner_iter",
    },
}


def noise_power_w(bandwidth_mhz: float, noise_figure_db: float) -> float:
    """Receiver noise power in watts for a bandwidth and noise figure."""
    dbm = THERMAL_NOISE_DBM_PER_HZ + 10.0 * math.log10(bandwidth_mhz * 1e6) + noise_figure_db
    return 10.0 ** ((dbm - 30.0) / 10.0)


def load_config(path: str | Path) -> ScenarioConfig:
    with open(path, encoding="utf-8") as fh:
        return ScenarioConfig.from_dict(json.load(fh))


def save_config(config: ScenarioConfig, path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(config.to_dict(), fh, indent=2)
        fh.write("\n")


def _per_user(value: float | Sequence[float], num_users: int, name: str) -> np.ndarray:
    arr = np.asarray(value, dtype=float)
    if arr.ndim == 0:
        return np.full(num_users, float(arr))
    if arr.shape != (num_users,):
        raise ConfigError(f"{name} must be a scalar or have one entry per user")
    return arr.copy()


def _to_json_scalar_or_list(value):
    if isinstance(value, tuple):
        return list(value)
    return value

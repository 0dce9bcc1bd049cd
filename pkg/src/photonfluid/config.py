"""Run configuration: defaults < TOML file < ``--set section.key=value``."""
from __future__ import annotations

import copy
import hashlib
import json
import math
from pathlib import Path
from typing import Any, Dict, Iterable, Optional

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib


class ConfigError(ValueError):
    pass


DEFAULTS: Dict[str, Dict[str, Any]] = {
    "dispersion": {
        "beta": [1.0, 2.0, 3.0],
        "q_min": 0.0,
        "q_max": 4.0,
        "n_q": 801,
    },
    "stability_map": {
        "beta_min": 0.0,
        "beta_max": 5.0,
        "n_beta": 251,
        "q_min": 0.0,
        "q_max": 5.0,
        "n_q": 251,
    },
    "grid": {
        "nx": 128,
        "ny": 128,
        "lx": 20 * math.pi,
        "ly": 20 * math.pi,
        "dz": 0.0,  # 0 -> min(0.1 dx^2, 0.01 / (g rho_max))
    },
    "run": {
        "mode": "dual",
        "g": 0.5,
        "rho0": 1.0,
        "v0": 1.0,
        "noise_amplitude": 1e-6,
        "noise_seed": 42,
        "z_end": 90.0,
        "snapshot_every": 0,  # 0 -> one snapshot per unit z
        "dealias": False,
    },
    "analysis": {
        "Q": [0.3, 0.5, 0.7, 1.5],
        "amp_lo": 1e-7,
        "amp_hi": 1e-2,
        "global_hi": 1e-3,
        "harmonic_margin": 30.0,
        "vortex_floor": 1e-3,  # relative to max density
        "far_field": False,
    },
    "vapor": {
        "atom_file": "",
        "densities_cm3": [1e11, 1e12, 1e13],
        "detuning_mhz": -120.0,
        "intensity_w_cm2": 0.4,
        "wavelength_nm": 780.0,
        "scan_min_over_gamma": -100.0,
        "scan_max_over_gamma": -5.0,
        "n_scan": 96,
    },
}


def _parse_value(text: str) -> Any:
    try:
        return tomllib.loads(f"v = {text}")["v"]
    except tomllib.TOMLDecodeError:
        return text


def _coerce(section: str, key: str, value: Any, default: Any) -> Any:
    where = f"{section}.{key}"
    if isinstance(default, bool):
        if not isinstance(value, bool):
            raise ConfigError(f"{where} expects true/false, got {value!r}")
        return value
    if isinstance(default, int):
        if isinstance(value, bool) or not isinstance(value, int):
            if isinstance(value, float) and value.is_integer():
                return int(value)
            raise ConfigError(f"{where} expects an integer, got {value!r}")
        return value
    if isinstance(default, float):
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ConfigError(f"{where} expects a number, got {value!r}")
        return float(value)
    if isinstance(default, list):
        if isinstance(value, (int, float)) and not isinstance(value, bool):
            value = [value]
        if not isinstance(value, list) or not all(
            isinstance(v, (int, float)) and not isinstance(v, bool) for v in value
        ):
            raise ConfigError(f"{where} expects a list of numbers, got {value!r}")
        return [float(v) for v in value]
    if isinstance(default, str):
        if not isinstance(value, str):
            raise ConfigError(f"{where} expects a string, got {value!r}")
        return value
    return value


def _merge(resolved: dict, updates: dict, origin: str) -> None:
    for section, values in updates.items():
        if section not in resolved:
            raise ConfigError(f"unknown section [{section}] in {origin}")
        if not isinstance(values, dict):
            raise ConfigError(f"[{section}] in {origin} must be a table")
        for key, value in values.items():
            if key not in resolved[section]:
                raise ConfigError(f"unknown key {section}.{key} in {origin}")
            resolved[section][key] = _coerce(section, key, value, DEFAULTS[section][key])


def resolve(path: Optional[str] = None, overrides: Iterable[str] = ()) -> dict:
    """Merged configuration; every parameter has a value."""
    resolved = copy.deepcopy(DEFAULTS)
    if path:
        try:
            data = tomllib.loads(Path(path).read_text())
        except OSError as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
        except tomllib.TOMLDecodeError as exc:
            raise ConfigError(f"invalid TOML in {path}: {exc}") from exc
        _merge(resolved, data, str(path))
    for item in overrides:
        if "=" not in item:
            raise ConfigError(f"override {item!r} must look like section.key=value")
        dotted, raw = item.split("=", 1)
        parts = dotted.strip().split(".")
        if len(parts) != 2:
            raise ConfigError(f"override key {dotted!r} must be section.key")
        section, key = parts
        _merge(resolved, {section: {key: _parse_value(raw.strip())}}, f"--set {item}")
    return resolved


def digest(config: dict) -> str:
    """SHA-256 of the canonical JSON form of a resolved configuration."""
    text = json.dumps(config, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(text.encode()).hexdigest()

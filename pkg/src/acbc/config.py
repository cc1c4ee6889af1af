"""JSON run configuration: plant description plus per-stage settings."""

from __future__ import annotations

import copy
import hashlib
import json
from dataclasses import dataclass
from pathlib import Path
from typing import Any

import numpy as np

from .expr import Dictionary
from .model import DEFAULT_EPS1, DEFAULT_EPS2, Box, InputConstraints, PlantModel, RegionSpec

FORMAT_VERSION = 1


class ConfigError(ValueError):
    pass


DEFAULTS: dict[str, Any] = {
    "augmentation": {"eps1": DEFAULT_EPS1, "eps2": DEFAULT_EPS2},
    "experiment": {"T": None, "excitation": None, "seed": 0, "richness_retries": 3},
    "synthesis": {
        "varpi": 0.01,
        "varpi_sweep": None,
        "z2_norm": "spectral",
        "grid_res": 21,
        "sound": False,
        "levels": "optimized",
    },
    "scenario": {
        "path": "probabilistic",
        "epsilon": 0.01,
        "beta": 1e-10,
        "n_samples": None,
        "grid_counts": 51,
        "grid_rounds": 3,
        "coupling": "auto",
        "audit_samples": 100_000,
        "seed": 0,
    },
    "verification": {
        "grid_res": None,
        "max_grid_points": 1_000_000,
        "n_samples": 1_000_000,
        "level_samples": 10_000,
        "n_runs": 1000,
        "horizon": None,
        "heatmap_rows": 200_000,
        "rollout_csv_runs": None,
        "seed": 0,
    },
}

_CHOICES = {
    ("synthesis", "z2_norm"): {"spectral", "frobenius"},
    ("synthesis", "levels"): {"optimized", "conservative"},
    ("scenario", "path"): {"none", "deterministic", "probabilistic"},
    ("scenario", "coupling"): {"auto", "off"},
}


def _box(obj, what: str, dim: int) -> Box:
    try:
        b = Box.from_json(obj)
    except (KeyError, TypeError) as exc:
        raise ConfigError(f"{what}: expected {{'lower': [...], 'upper': [...]}}") from exc
    if b.dim != dim:
        raise ConfigError(f"{what}: expected dimension {dim}, got {b.dim}")
    return b


@dataclass
class RunConfig:
    raw: dict
    plant: PlantModel

    def section(self, name: str) -> dict:
        return self.raw[name]

    @property
    def T(self) -> int:
        return int(self.raw["experiment"]["T"])

    def digest(self) -> str:
        return hashlib.sha256(json.dumps(self.raw, sort_keys=True).encode()).hexdigest()

    def with_seed(self, seed: int) -> "RunConfig":
        raw = copy.deepcopy(self.raw)
        for sec in ("experiment", "scenario", "verification"):
            raw[sec]["seed"] = int(seed)
        return RunConfig(raw, self.plant)

    def with_overrides(self, section: str, **values) -> "RunConfig":
        raw = copy.deepcopy(self.raw)
        raw[section].update(values)
        _validate_settings(raw)
        return RunConfig(raw, self.plant)


def _validate_settings(raw: dict) -> None:
    for (sec, key), allowed in _CHOICES.items():
        if raw[sec][key] not in allowed:
            raise ConfigError(f"{sec}.{key} must be one of {sorted(allowed)}, got {raw[sec][key]!r}")
    syn = raw["synthesis"]
    vals = [syn["varpi"]] + list(syn["varpi_sweep"] or [])
    if any(not (isinstance(v, (int, float)) and v > 0) for v in vals):
        raise ConfigError("synthesis.varpi values must be positive numbers")
    T = raw["experiment"]["T"]
    if not (isinstance(T, int) and T >= 1):
        raise ConfigError("experiment.T must be a positive integer")
    sc = raw["scenario"]
    if not (0 < sc["epsilon"] < 1 and 0 < sc["beta"] < 1):
        raise ConfigError("scenario.epsilon and scenario.beta must lie in (0, 1)")


def build_plant(spec: dict) -> PlantModel:
    try:
        n, m = int(spec["n"]), int(spec["m"])
        terms = list(spec["dictionary"])
    except KeyError as exc:
        raise ConfigError(f"plant.{exc.args[0]} is required") from exc
    d = Dictionary.from_strings(n, m, terms)
    A = spec.get("A")
    if A is not None:
        A = np.asarray(A, dtype=float)
        if A.shape != (n, d.N):
            raise ConfigError(f"plant.A must be {n}x{d.N}, got {A.shape}")
    if "state_box" not in spec or "initial_boxes" not in spec or "unsafe_boxes" not in spec:
        raise ConfigError("plant needs state_box, initial_boxes and unsafe_boxes")
    regions = RegionSpec(
        _box(spec["state_box"], "plant.state_box", n),
        [_box(b, "plant.initial_boxes", n) for b in spec["initial_boxes"]],
        [_box(b, "plant.unsafe_boxes", n) for b in spec["unsafe_boxes"]],
    )
    if "input_bounds" in spec:
        ib = spec["input_bounds"]
        inputs = InputConstraints.from_bounds(ib["lower"], ib["upper"])
    elif "input_constraints" in spec:
        inputs = InputConstraints(np.asarray(spec["input_constraints"], dtype=float))
    else:
        raise ConfigError("plant needs input_bounds or input_constraints")
    return PlantModel(d, A, regions, inputs)


def parse_config(obj: dict) -> RunConfig:
    if not isinstance(obj, dict) or "plant" not in obj:
        raise ConfigError("config must be an object with a 'plant' section")
    unknown = set(obj) - set(DEFAULTS) - {"plant", "format_version", "name", "description"}
    if unknown:
        raise ConfigError(f"unknown config sections: {sorted(unknown)}")
    raw: dict[str, Any] = {"format_version": obj.get("format_version", FORMAT_VERSION)}
    if raw["format_version"] != FORMAT_VERSION:
        raise ConfigError(f"unsupported format_version {raw['format_version']}")
    for key in ("name", "description"):
        if key in obj:
            raw[key] = obj[key]
    raw["plant"] = copy.deepcopy(obj["plant"])
    for sec, defaults in DEFAULTS.items():
        given = obj.get(sec, {}) or {}
        bad = set(given) - set(defaults)
        if bad:
            raise ConfigError(f"unknown keys in {sec}: {sorted(bad)}")
        raw[sec] = {**copy.deepcopy(defaults), **copy.deepcopy(given)}
    try:
        plant = build_plant(raw["plant"])
    except ConfigError:
        raise
    except (ValueError, TypeError) as exc:
        raise ConfigError(f"invalid plant: {exc}") from exc
    if raw["experiment"]["T"] is None:
        # smallest length that can be rich
        raw["experiment"]["T"] = plant.dictionary.N + 1
    _validate_settings(raw)
    return RunConfig(raw, plant)


def load_config(path) -> RunConfig:
    try:
        obj = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON ({exc})") from exc
    return parse_config(obj)


EXAMPLES_DIR = Path(__file__).parent / "configs"


def example_config(name: str) -> RunConfig:
    """Bundled configuration by name, e.g. ``"case1"``."""
    return load_config(EXAMPLES_DIR / f"{name}.json")

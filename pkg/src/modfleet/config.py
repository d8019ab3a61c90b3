"""Scenario configuration: one flat key-value file plus flag overrides.

The config file is a flat JSON object whose keys match the field names
below. Command-line flags override file values; defaults fill the rest.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, fields

from .analytics import CriticalDensityConfig
from .errors import MalformedFile


@dataclass
class ScenarioConfig:
    nodes_path: str | None = None
    edges_path: str | None = None
    trips_path: str | None = None
    out_dir: str = "out"
    n_stations: int = 40
    seed: int = 0
    default_speed_kmh: float = 40.0
    slice_s: float = 600.0
    window_s: float = 600.0
    y_c: float = 0.08
    low_cut: float = 0.01
    focus: float = 0.50
    cap: float = 2.00
    lookahead_slices: int = 2
    pickup_bound_s: float = 180.0
    cluster_on: str = "both"
    histogram_bins: int = 20
    jobs: int = 1

    def validate(self) -> None:
        positive = ["n_stations", "default_speed_kmh", "slice_s", "window_s",
                    "pickup_bound_s", "lookahead_slices", "jobs"]
        for name in positive:
            if getattr(self, name) <= 0:
                raise ValueError(f"config field {name} must be positive")
        if self.histogram_bins < 2:
            raise ValueError("histogram_bins must be >= 2")
        if self.cluster_on not in ("both", "origins"):
            raise ValueError("cluster_on must be 'both' or 'origins'")
        # raises on bad y_c / threshold ordering
        self.critical_density()

    def critical_density(self) -> CriticalDensityConfig:
        return CriticalDensityConfig(self.y_c, self.low_cut, self.focus, self.cap)


_FIELD_NAMES = {f.name for f in fields(ScenarioConfig)}


def load_config_file(path) -> dict:
    try:
        with open(path, encoding="utf-8") as fh:
            doc = json.load(fh)
    except json.JSONDecodeError as exc:
        raise MalformedFile(path, exc.lineno, f"invalid JSON: {exc.msg}") from None
    if not isinstance(doc, dict):
        raise MalformedFile(path, 1, "config must be a flat JSON object")
    unknown = sorted(set(doc) - _FIELD_NAMES)
    if unknown:
        raise MalformedFile(path, 1, f"unknown config keys: {unknown}")
    return doc


def make_config(file_values: dict | None = None, overrides: dict | None = None) -> ScenarioConfig:
    """Defaults, updated by file values, updated by non-None overrides."""
    merged: dict = {}
    for source in (file_values or {}), (overrides or {}):
        for key, value in source.items():
            if key not in _FIELD_NAMES:
                raise ValueError(f"unknown config key: {key}")
            if value is not None:
                merged[key] = value
    cfg = ScenarioConfig(**merged)
    cfg.validate()
    return cfg

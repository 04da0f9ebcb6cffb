"""Scenario configuration: network size, traffic, radio and channel constants."""

from __future__ import annotations

import dataclasses
import json
import math
from dataclasses import dataclass
from pathlib import Path


class ConfigurationError(ValueError):
    """Raised when a scenario (or a mode combination) is invalid."""


LAYOUT_KINDS = ("dense_grid", "wraparound_grid")


@dataclass
class ScenarioConfig:
    """All parameters of one simulated factory-hall scenario.

    Units: distances in meters, bandwidth in Hz, cycle_time in seconds,
    power spectral densities in dBm/Hz.  ``num_cells`` controllers each serve
    ``actuators_per_cell`` actuators with one ``message_bits``-bit message per
    ``cycle_time`` cycle, delivered over two equal-length hops.
    """

    num_cells: int
    actuators_per_cell: int
    message_bits: int
    cycle_time: float
    bandwidth: float
    tx_psd_dbm_hz: float
    noise_psd_dbm_hz: float = -169.0
    carrier_freq_hz: float = 3e9
    cell_side_m: float = 10.0
    cell_separation_m: float | None = None  # defaults to cell_side_m (dense tiling)
    min_distance_m: float = 1.0
    rician_k_factor_db: float = 4.7
    shadow_std_los_db: float = 3.0
    shadow_std_nlos_db: float = 4.0
    layout_kind: str = "dense_grid"

    def __post_init__(self):
        if self.cell_separation_m is None:
            self.cell_separation_m = self.cell_side_m
        self.validate()

    def validate(self):
        if self.num_cells < 1:
            raise ConfigurationError("num_cells must be >= 1")
        root = math.isqrt(self.num_cells)
        if root * root != self.num_cells:
            raise ConfigurationError(
                f"num_cells must be a perfect square, got {self.num_cells}"
            )
        if self.actuators_per_cell < 1:
            raise ConfigurationError("actuators_per_cell must be >= 1")
        if self.message_bits <= 0:
            raise ConfigurationError("message_bits must be > 0")
        if self.cycle_time <= 0:
            raise ConfigurationError("cycle_time must be > 0")
        if self.bandwidth <= 0:
            raise ConfigurationError("bandwidth must be > 0")
        if self.cell_side_m <= 0:
            raise ConfigurationError("cell_side_m must be > 0")
        if self.cell_separation_m < self.cell_side_m:
            raise ConfigurationError(
                "cell_separation_m must be >= cell_side_m "
                f"({self.cell_separation_m} < {self.cell_side_m})"
            )
        if self.min_distance_m <= 0:
            raise ConfigurationError("min_distance_m must be > 0")
        if self.layout_kind not in LAYOUT_KINDS:
            raise ConfigurationError(
                f"layout_kind must be one of {LAYOUT_KINDS}, got {self.layout_kind!r}"
            )

    @property
    def num_actuators(self) -> int:
        return self.num_cells * self.actuators_per_cell

    @property
    def snr_linear(self) -> float:
        """Transmit-to-noise PSD ratio (linear), before any channel gain."""
        return 10.0 ** ((self.tx_psd_dbm_hz - self.noise_psd_dbm_hz) / 10.0)

    @property
    def rate_bps(self) -> float:
        """Aggregate per-cell rate: K*b bits delivered in each half cycle."""
        return self.actuators_per_cell * self.message_bits / (0.5 * self.cycle_time)

    @property
    def rician_k_factor_linear(self) -> float:
        return 10.0 ** (self.rician_k_factor_db / 10.0)

    def replace(self, **kwargs) -> "ScenarioConfig":
        return dataclasses.replace(self, **kwargs)

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)


_FIELD_NAMES = {f.name for f in dataclasses.fields(ScenarioConfig)}
_REQUIRED = {
    f.name
    for f in dataclasses.fields(ScenarioConfig)
    if f.default is dataclasses.MISSING and f.default_factory is dataclasses.MISSING
}


def scenario_from_dict(data: dict) -> ScenarioConfig:
    unknown = set(data) - _FIELD_NAMES
    if unknown:
        raise ConfigurationError(f"unknown scenario keys: {sorted(unknown)}")
    missing = _REQUIRED - set(data)
    if missing:
        raise ConfigurationError(f"missing scenario keys: {sorted(missing)}")
    return ScenarioConfig(**data)


def load_scenario(path: str | Path) -> ScenarioConfig:
    """Read a scenario from a JSON file whose keys mirror ScenarioConfig."""
    with open(path) as fh:
        try:
            data = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ConfigurationError(f"{path}: not valid JSON ({exc})") from exc
    if not isinstance(data, dict):
        raise ConfigurationError(f"{path}: scenario file must hold a JSON object")
    return scenario_from_dict(data)

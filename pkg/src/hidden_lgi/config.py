# enable type annotation syntax on Python versions earlier than 3.9
from __future__ import annotations

import json
import logging
import os
import pathlib
from dataclasses import dataclass, fields
from typing import Mapping, Union

import numpy as np

from hidden_lgi.errors import InvalidConfig, LgiError
from hidden_lgi.expsim import DEFAULT_REPLICATES, DEFAULT_SHOTS
from hidden_lgi.quantum import MeasurementScenario, observable_from_bloch
from hidden_lgi.temporal import get_scenario

logger = logging.getLogger(__name__)

OUTPUT_FORMATS = ("csv", "json")
LOG_LEVELS = ("DEBUG", "INFO", "WARNING", "ERROR", "CRITICAL")

# D = 0.99 stands in for the D -> 1 curve
DEFAULT_D_VALUES = (0.45, 0.99)

ScenarioSpec = Union[str, Mapping[str, list]]


def _env_int(env: Mapping[str, str], name: str, default: int, minimum: int) -> int:
    raw = env.get(name)
    if raw is None or raw == "":
        return default
    try:
        value = int(raw)
    except ValueError:
        raise InvalidConfig(f"{name}={raw!r} is not an integer") from None
    if value < minimum:
        raise InvalidConfig(f"{name} must be at least {minimum}, got {value}")
    return value


@dataclass(frozen=True)
class RunDefaults:
    """Defaults taken from the environment (a .env file is loaded by the runner)."""

    seed: int = 0
    resolution: int = 21
    shots: int = DEFAULT_SHOTS
    replicates: int = DEFAULT_REPLICATES
    log_level: str = "WARNING"

    @classmethod
    def from_env(cls, env: Mapping[str, str] | None = None) -> RunDefaults:
        env = os.environ if env is None else env
        log_level = env.get("LGI_LOG_LEVEL", "WARNING").upper()
        if log_level not in LOG_LEVELS:
            raise InvalidConfig(f"LGI_LOG_LEVEL must be one of {LOG_LEVELS}, got {log_level!r}")
        return cls(
            seed=_env_int(env, "LGI_SEED", 0, 0),
            resolution=_env_int(env, "LGI_RESOLUTION", 21, 2),
            shots=_env_int(env, "LGI_SHOTS", DEFAULT_SHOTS, 1),
            replicates=_env_int(env, "LGI_REPLICATES", DEFAULT_REPLICATES, 1),
            log_level=log_level,
        )


@dataclass(frozen=True)
class SweepConfig:
    v_range: tuple[float, float, int] = (0.0, 1.0, 101)
    d_values: tuple[float, ...] = DEFAULT_D_VALUES
    filtered: bool = True
    scenario: ScenarioSpec = "canonical"
    output_path: str | None = None
    format: str = "csv"

    def __post_init__(self):
        try:
            start, stop, steps = self.v_range
            start, stop = float(start), float(stop)
        except (TypeError, ValueError):
            raise InvalidConfig("v_range must be [start, stop, steps]") from None
        if isinstance(steps, bool) or not isinstance(steps, (int, np.integer)) or steps < 2:
            raise InvalidConfig(f"v_range needs an integer step count of at least 2, got {steps!r}")
        if not 0 <= start <= stop <= 1:
            raise InvalidConfig(f"v_range must satisfy 0 <= start <= stop <= 1, got {start}, {stop}")
        try:
            d_values = tuple(float(d) for d in self.d_values)
        except (TypeError, ValueError):
            raise InvalidConfig("d_values must be a list of numbers") from None
        if not d_values or any(not 0 <= d <= 1 for d in d_values):
            raise InvalidConfig(f"d_values must be a non-empty list within [0, 1], got {d_values}")
        if self.format not in OUTPUT_FORMATS:
            raise InvalidConfig(f"format must be one of {OUTPUT_FORMATS}, got {self.format!r}")
        if not isinstance(self.filtered, bool):
            raise InvalidConfig(f"filtered must be true or false, got {self.filtered!r}")
        object.__setattr__(self, "v_range", (start, stop, int(steps)))
        object.__setattr__(self, "d_values", d_values)
        # fail early on unknown scenario names or malformed directions
        self.measurement_scenario()

    def v_grid(self) -> np.ndarray:
        start, stop, steps = self.v_range
        return np.linspace(start, stop, steps)

    def measurement_scenario(self) -> MeasurementScenario:
        """The named scenario, or one given as {"t0": [n1, n2], "t1": [n1, n2]} Bloch directions."""
        if isinstance(self.scenario, str):
            try:
                return get_scenario(self.scenario)
            except LgiError as e:
                raise InvalidConfig(str(e)) from e
        try:
            t0 = tuple(observable_from_bloch(n) for n in self.scenario["t0"])
            t1 = tuple(observable_from_bloch(n) for n in self.scenario["t1"])
            return MeasurementScenario(t0, t1, name="custom")
        except (KeyError, TypeError, LgiError) as e:
            raise InvalidConfig(f"explicit scenario is invalid: {e}") from e

    def replace(self, **overrides) -> SweepConfig:
        values = {f.name: getattr(self, f.name) for f in fields(self)}
        values.update({k: v for k, v in overrides.items() if v is not None})
        return SweepConfig(**values)

    @classmethod
    def from_dict(cls, doc: Mapping) -> SweepConfig:
        if not isinstance(doc, Mapping):
            raise InvalidConfig("sweep config must be a JSON object")
        known = {f.name for f in fields(cls)}
        unknown = set(doc) - known
        if unknown:
            raise InvalidConfig(f"unknown sweep config fields: {sorted(unknown)}")
        values = dict(doc)
        for name in ("v_range", "d_values"):
            if name in values:
                try:
                    values[name] = tuple(values[name])
                except TypeError:
                    raise InvalidConfig(f"{name} must be a list, got {values[name]!r}") from None
        return cls(**values)

    def to_dict(self) -> dict:
        return {
            "v_range": list(self.v_range),
            "d_values": list(self.d_values),
            "filtered": self.filtered,
            "scenario": self.scenario,
            "output_path": self.output_path,
            "format": self.format,
        }


def load_sweep_config(path: str | pathlib.Path) -> SweepConfig:
    path = pathlib.Path(path)
    try:
        doc = json.loads(path.read_text())
    except json.JSONDecodeError as e:
        raise InvalidConfig(f"{path}: {e}") from e
    config = SweepConfig.from_dict(doc)
    logger.debug("loaded sweep config from %s: %s", path, config)
    return config

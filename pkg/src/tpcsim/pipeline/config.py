"""Run configuration, loaded from a single JSON document."""
from __future__ import annotations

import dataclasses
import json
from dataclasses import dataclass, field
from pathlib import Path

from ..core import ConfigError, GridSpec
from ..rasterize import RNG_MODES, DriftParams
from ..spectral.noise import NoiseModel
from ..spectral.response import ResponseParams

DISPATCH_MODES = ("per_depo", "batched")


@dataclass(frozen=True)
class RngConfig:
    mode: str = "substream"
    seed: int = 0
    slice_len: int = 1024

    def __post_init__(self):
        if self.mode not in RNG_MODES:
            raise ConfigError(f"rng mode must be one of {RNG_MODES}, got {self.mode!r}")
        if self.slice_len < 1:
            raise ConfigError("slice_len must be >= 1")


@dataclass(frozen=True)
class AdcParams:
    scale: float = 1.0
    offset: float = 2048.0
    bits: int = 12

    def __post_init__(self):
        if not 1 <= self.bits <= 16:
            raise ConfigError(f"adc bits must lie in [1, 16], got {self.bits}")


_SECTIONS = {
    "grid": GridSpec,
    "drift": DriftParams,
    "response": ResponseParams,
    "noise": NoiseModel,
    "rng": RngConfig,
    "adc": AdcParams,
}


@dataclass(frozen=True)
class SimConfig:
    grid: GridSpec = field(default_factory=GridSpec)
    drift: DriftParams = field(default_factory=DriftParams)
    response: ResponseParams = field(default_factory=ResponseParams)
    noise: NoiseModel = field(default_factory=NoiseModel)
    n_sigma: float = 3.0
    rng: RngConfig = field(default_factory=RngConfig)
    dispatch: str = "batched"
    batch_size: int = 4096
    workers: int = 1
    adc: AdcParams = field(default_factory=AdcParams)

    def __post_init__(self):
        if self.dispatch not in DISPATCH_MODES:
            raise ConfigError(f"dispatch must be one of {DISPATCH_MODES}, got {self.dispatch!r}")
        if self.batch_size < 1:
            raise ConfigError("batch_size must be >= 1")
        if self.workers < 1:
            raise ConfigError("workers must be >= 1")
        if not self.n_sigma > 0:
            raise ConfigError("n_sigma must be positive")
        if self.rng.mode == "inline" and self.workers > 1:
            raise ConfigError("inline rng draws are order dependent and need workers=1; "
                              "use the pool or substream mode for parallel runs")

    def to_dict(self) -> dict:
        out = {}
        for f in dataclasses.fields(self):
            v = getattr(self, f.name)
            if f.name in _SECTIONS:
                v = v.to_dict() if hasattr(v, "to_dict") else dataclasses.asdict(v)
            out[f.name] = v
        return out

    @classmethod
    def from_dict(cls, d: dict) -> "SimConfig":
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        kwargs = {}
        for key, value in d.items():
            section = _SECTIONS.get(key)
            if section is None:
                kwargs[key] = value
                continue
            if not isinstance(value, dict):
                raise ConfigError(f"config section {key!r} must be an object")
            fields = {f.name for f in dataclasses.fields(section)}
            bad = set(value) - fields
            if bad:
                raise ConfigError(f"unknown keys in {key!r}: {sorted(bad)}")
            value = dict(value)
            if key == "response" and "wire_weights" in value:
                value["wire_weights"] = tuple(value["wire_weights"])
            kwargs[key] = section(**value)
        return cls(**kwargs)

    @classmethod
    def load(cls, path) -> "SimConfig":
        try:
            return cls.from_dict(json.loads(Path(path).read_text()))
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}: invalid JSON ({exc})") from None

    def save(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=2) + "\n")

    def with_overrides(self, *, seed=None, workers=None, dispatch=None, rng_mode=None) -> "SimConfig":
        """Copy with the command-line style overrides applied (``None`` keeps a value)."""
        rng = self.rng
        if seed is not None or rng_mode is not None:
            rng = dataclasses.replace(rng, seed=rng.seed if seed is None else int(seed),
                                      mode=rng.mode if rng_mode is None else rng_mode)
        return dataclasses.replace(
            self, rng=rng,
            workers=self.workers if workers is None else int(workers),
            dispatch=self.dispatch if dispatch is None else dispatch)

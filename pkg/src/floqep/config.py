"""Run configuration: a single JSON document with a schema version."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path

from .model import PRESET_NAMES, PresetTemplate
from .sweep import ENGINES

SCHEMA_VERSION = 1


class ConfigError(ValueError):
    """Invalid or malformed run configuration."""


@dataclass(frozen=True)
class AxisSpec:
    """Either a single value or a uniform range for one sweep axis."""

    value: float | None = None
    min: float | None = None
    max: float | None = None
    count: int | None = None

    @property
    def is_range(self) -> bool:
        return self.value is None

    def validate(self, name: str, positive: bool = False, nonnegative: bool = False):
        if self.is_range:
            if self.min is None or self.max is None or self.count is None:
                raise ConfigError(f"{name}: range needs min, max and count")
            if not (math.isfinite(self.min) and math.isfinite(self.max)):
                raise ConfigError(f"{name}: range bounds must be finite")
            if self.count < 2:
                raise ConfigError(f"{name}: range count must be >= 2")
            if self.max <= self.min:
                raise ConfigError(f"{name}: range must be non-degenerate (max > min)")
            if positive and self.min <= 0:
                raise ConfigError(f"{name}: values must be > 0")
            if nonnegative and self.min < 0:
                raise ConfigError(f"{name}: values must be >= 0")
        else:
            if not math.isfinite(self.value):
                raise ConfigError(f"{name}: value must be finite")
            if positive and self.value <= 0:
                raise ConfigError(f"{name}: value must be > 0")
            if nonnegative and self.value < 0:
                raise ConfigError(f"{name}: value must be >= 0")


def _axis_from(doc, name) -> AxisSpec:
    if not isinstance(doc, dict):
        raise ConfigError(f"{name}: expected an object with value or min/max/count")
    if "value" in doc:
        extra = set(doc) - {"value"}
        if extra:
            raise ConfigError(f"{name}: unexpected keys {sorted(extra)}")
        return AxisSpec(value=float(doc["value"]))
    missing = {"min", "max", "count"} - set(doc)
    if missing:
        raise ConfigError(f"{name}: missing keys {sorted(missing)}")
    extra = set(doc) - {"min", "max", "count"}
    if extra:
        raise ConfigError(f"{name}: unexpected keys {sorted(extra)}")
    if not isinstance(doc["count"], int):
        raise ConfigError(f"{name}: count must be an integer")
    return AxisSpec(min=float(doc["min"]), max=float(doc["max"]), count=doc["count"])


def _axis_to(axis: AxisSpec) -> dict:
    if axis.is_range:
        return {"min": axis.min, "max": axis.max, "count": axis.count}
    return {"value": axis.value}


@dataclass(frozen=True)
class RunConfig:
    preset: str
    J: float
    beta: int
    family: str
    gamma: AxisSpec
    omega: AxisSpec
    engine: str
    cutoff: int
    berry_steps: int
    richardson: bool
    threads: int | None
    out_dir: str

    @property
    def template(self) -> PresetTemplate:
        return PresetTemplate(name=self.preset, J=self.J, beta=self.beta, family=self.family)


def parse_config(doc: dict) -> RunConfig:
    """Validate a configuration document and build a :class:`RunConfig`."""
    if not isinstance(doc, dict):
        raise ConfigError("configuration must be a JSON object")
    version = doc.get("schema_version")
    if version != SCHEMA_VERSION:
        raise ConfigError(f"unsupported schema_version {version!r} (expected {SCHEMA_VERSION})")
    model = doc.get("model")
    if not isinstance(model, dict):
        raise ConfigError("missing 'model' object")
    preset_name = model.get("preset")
    if preset_name not in PRESET_NAMES:
        raise ConfigError(
            f"unknown preset {preset_name!r}; known: {', '.join(PRESET_NAMES)}"
        )
    beta = model.get("beta", 1)
    if not isinstance(beta, int) or isinstance(beta, bool) or beta < 1:
        raise ConfigError("model.beta must be an integer >= 1")
    family = model.get("family", "smooth")
    if family not in ("smooth", "square"):
        raise ConfigError("model.family must be 'smooth' or 'square'")
    J = float(model.get("J", 1.0))
    if not math.isfinite(J):
        raise ConfigError("model.J must be finite")

    gamma = _axis_from(doc.get("gamma", {"value": 0.5}), "gamma")
    gamma.validate("gamma", nonnegative=True)
    omega = _axis_from(doc.get("omega", {"value": 1.0}), "omega")
    omega.validate("omega", positive=True)

    engine = doc.get("engine", "monodromy-piecewise")
    if engine not in ENGINES:
        raise ConfigError(f"unknown engine {engine!r}; known: {', '.join(ENGINES)}")
    cutoff = doc.get("cutoff", 20)
    if not isinstance(cutoff, int) or cutoff < 1:
        raise ConfigError("cutoff must be a positive integer")
    if cutoff < beta:
        raise ConfigError(f"cutoff {cutoff} below the largest drive harmonic {beta}")
    berry_steps = doc.get("berry_steps", 8192)
    if not isinstance(berry_steps, int) or berry_steps < 256:
        raise ConfigError("berry_steps must be an integer >= 256")
    richardson = doc.get("richardson", True)
    if not isinstance(richardson, bool):
        raise ConfigError("richardson must be a boolean")
    threads = doc.get("threads")
    if threads is not None and (not isinstance(threads, int) or threads < 1):
        raise ConfigError("threads must be a positive integer")
    out_dir = doc.get("out_dir", "out")
    if not isinstance(out_dir, str) or not out_dir:
        raise ConfigError("out_dir must be a non-empty string")

    return RunConfig(
        preset=preset_name,
        J=J,
        beta=beta,
        family=family,
        gamma=gamma,
        omega=omega,
        engine=engine,
        cutoff=cutoff,
        berry_steps=berry_steps,
        richardson=richardson,
        threads=threads,
        out_dir=out_dir,
    )


def serialize_config(config: RunConfig) -> dict:
    """Inverse of :func:`parse_config` (parse(serialize(c)) == c)."""
    doc = {
        "schema_version": SCHEMA_VERSION,
        "model": {
            "preset": config.preset,
            "J": config.J,
            "beta": config.beta,
            "family": config.family,
        },
        "gamma": _axis_to(config.gamma),
        "omega": _axis_to(config.omega),
        "engine": config.engine,
        "cutoff": config.cutoff,
        "berry_steps": config.berry_steps,
        "richardson": config.richardson,
        "out_dir": config.out_dir,
    }
    if config.threads is not None:
        doc["threads"] = config.threads
    return doc


def load_config(path) -> RunConfig:
    path = Path(path)
    try:
        with open(path) as fh:
            doc = json.load(fh)
    except FileNotFoundError:
        raise ConfigError(f"config file not found: {path}")
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config file {path} is not valid JSON: {exc}")
    return parse_config(doc)

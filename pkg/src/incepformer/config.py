"""Run configuration: built-in defaults, a JSON file, then command-line overrides.

The resolved configuration is a plain nested dict with these sections::

    seed, workers, outdir, run_id
    pipeline:  td, tw, bands [[low, high], ...], filter_order, channels
    synth:     n_classes, n_blocks, snr_db, n_harmonics, fs, stim_duration, latency
    model:     ModelConfig fields
    schedule:  TrainSchedule fields (its seed always mirrors the top-level seed)
    baseline:  method, n_harmonics, a, b

Dotted keys address nested values, e.g. ``model.d_model=32``.
"""

from __future__ import annotations

import copy
import json
from pathlib import Path

from .errors import ConfigError
from .evaluation import TrainSchedule, fingerprint
from .model import ModelConfig
from .pipeline import DEFAULT_BANDS, OCCIPITAL_CHANNELS, FilterSpec

MAX_SEED = 2**64 - 1


def default_config() -> dict:
    return {
        "seed": 0,
        "workers": 1,
        "outdir": "runs",
        "run_id": None,
        "pipeline": {
            "td": 0.14,
            "tw": 1.0,
            "bands": [[b.low_hz, b.high_hz] for b in DEFAULT_BANDS],
            "filter_order": DEFAULT_BANDS[0].order,
            "channels": list(OCCIPITAL_CHANNELS),
        },
        "synth": {
            "n_classes": 40,
            "n_blocks": 6,
            "snr_db": 0.0,
            "n_harmonics": 3,
            "fs": 250.0,
            "stim_duration": 2.0,
            "latency": 0.14,
        },
        "model": ModelConfig().to_dict(),
        "schedule": TrainSchedule().to_dict(),
        "baseline": {"method": "fbcca", "n_harmonics": 5, "a": 1.25, "b": 0.25},
    }


def _merge(base: dict, update: dict, prefix: str = "") -> None:
    for key, value in update.items():
        if key not in base:
            raise ConfigError(f"unknown config key {prefix}{key}")
        if isinstance(base[key], dict) and isinstance(value, dict):
            _merge(base[key], value, f"{prefix}{key}.")
        else:
            base[key] = value


def parse_override(text: str) -> tuple[str, object]:
    """Split ``a.b=value``; the value is parsed as JSON when possible, else kept as a string."""
    if "=" not in text:
        raise ConfigError(f"override {text!r} must look like key.path=value")
    key, raw = text.split("=", 1)
    try:
        value = json.loads(raw)
    except json.JSONDecodeError:
        value = raw
    return key.strip(), value


def set_dotted(cfg: dict, key: str, value) -> None:
    parts = key.split(".")
    node = cfg
    for part in parts[:-1]:
        if part not in node or not isinstance(node[part], dict):
            raise ConfigError(f"unknown config key {key}")
        node = node[part]
    if parts[-1] not in node:
        raise ConfigError(f"unknown config key {key}")
    node[parts[-1]] = value


def load_config_file(path) -> dict:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read config file {path}: {exc.strerror}") from exc
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config file {path} is not valid JSON: {exc}") from exc
    if not isinstance(data, dict):
        raise ConfigError("config file must hold a JSON object")
    return data


def resolve_config(path=None, overrides=()) -> dict:
    """Defaults, then the file at ``path``, then ``overrides`` as (dotted key, value) pairs."""
    cfg = default_config()
    if path is not None:
        _merge(cfg, load_config_file(path))
    for key, value in overrides:
        set_dotted(cfg, key, value)
    validate_config(cfg)
    return cfg


def validate_config(cfg: dict) -> None:
    seed = cfg["seed"]
    if not isinstance(seed, int) or isinstance(seed, bool) or not 0 <= seed <= MAX_SEED:
        raise ConfigError(f"seed must be an integer in [0, 2**64), got {seed!r}")
    cfg["schedule"]["seed"] = seed
    cfg["model"]["seed"] = seed
    if not isinstance(cfg["workers"], int) or cfg["workers"] < 1:
        raise ConfigError("workers must be a positive integer")
    pipe = cfg["pipeline"]
    if pipe["tw"] <= 0 or pipe["td"] < 0:
        raise ConfigError("tw must be positive and td non-negative")
    model_config(cfg)
    schedule(cfg)
    filter_specs(cfg)


def model_config(cfg: dict) -> ModelConfig:
    try:
        return ModelConfig.from_dict(cfg["model"])
    except TypeError as exc:
        raise ConfigError(f"bad model config: {exc}") from exc


def schedule(cfg: dict) -> TrainSchedule:
    try:
        return TrainSchedule.from_dict(cfg["schedule"])
    except TypeError as exc:
        raise ConfigError(f"bad schedule: {exc}") from exc


def filter_specs(cfg: dict) -> list[FilterSpec]:
    order = cfg["pipeline"]["filter_order"]
    try:
        return [FilterSpec(float(lo), float(hi), int(order)) for lo, hi in cfg["pipeline"]["bands"]]
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"bands must be a list of [low, high] pairs: {exc}") from exc


def run_id(cfg: dict, command: str, extra: dict | None = None) -> str:
    """The configured run id, or ``<command>-<hash>`` derived from the resolved inputs."""
    if cfg.get("run_id"):
        return str(cfg["run_id"])
    payload = {"command": command, "config": strip_paths(cfg), **(extra or {})}
    return f"{command}-{fingerprint(payload)[:12]}"


def strip_paths(cfg: dict) -> dict:
    """Copy without the output location, which must not change a run's identity."""
    out = copy.deepcopy(cfg)
    out.pop("outdir", None)
    out.pop("run_id", None)
    return out

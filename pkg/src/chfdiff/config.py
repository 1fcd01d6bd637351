"""Flat ``key = value`` run configuration.

One assignment per line; lines starting with ``#`` are comments.  Each
command accepts a fixed set of keys (plus ``column.<name>`` / ``unit.<name>``
schema bindings where a dataset is read); anything else is rejected.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Callable

from .dataset import COLUMNS, CsvSchema
from .diffusion import TrainConfig
from .errors import ConfigError

FROM_MODEL = "auto"  # placeholder resolved from the model's published recipe


def _bool(text: str) -> bool:
    low = text.strip().lower()
    if low in ("1", "true", "yes", "on"):
        return True
    if low in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


def _ints(text: str) -> tuple[int, ...]:
    return tuple(int(v) for v in text.split(",") if v.strip())


def _floats(text: str) -> tuple[float, ...]:
    return tuple(float(v) for v in text.split(",") if v.strip())


def format_value(v) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        return repr(v)
    if isinstance(v, tuple):
        return ",".join(format_value(x) for x in v)
    return str(v)


@dataclass(frozen=True)
class Key:
    parse: Callable[[str], Any]
    default: Any


def _k_int(default):
    return Key(int, default)


def _k_float(default):
    return Key(float, default)


def _k_str(default):
    return Key(str, default)


def _k_bool(default):
    return Key(_bool, default)


_DATA = {"data": _k_str(""), "delimiter": _k_str(",")}
_SPLIT = {"split": _k_str(""), "train_fraction": _k_float(0.8), "val_fraction": _k_float(0.1),
          "test_fraction": _k_float(0.1), "split_seed": _k_int(0)}
_SAMPLING = {"checkpoint": _k_str(""), "use_ema": _k_bool(True), "T": _k_str(FROM_MODEL)}

_TRAIN_AUTO = ("epochs", "batch_size", "lr", "T", "hidden")

COMMAND_KEYS: dict[str, dict[str, Key]] = {
    "prepare": {**_DATA, **{k: v for k, v in _SPLIT.items() if k not in ("split", "split_seed")},
                "seed": _k_int(0), "feature_mode": _k_str("x")},
    "train": {
        **_DATA, **_SPLIT, "seed": _k_int(0), "model": _k_str("cdm"), "feature_mode": _k_str("x"),
        "epochs": _k_str(FROM_MODEL), "batch_size": _k_str(FROM_MODEL), "lr": _k_str(FROM_MODEL),
        "T": _k_str(FROM_MODEL), "hidden": _k_str(FROM_MODEL),
        "schedule": _k_str("sigmoid"), "beta_min": _k_float(1e-5), "beta_max": _k_float(1e-2),
        "slope": _k_float(6.0), "ema_mu": _k_float(0.9), "embed_width": _k_int(16),
        "embed_base": _k_float(10000.0),
    },
    "generate": {**_DATA, **_SPLIT, **_SAMPLING, "seed": _k_int(0), "n": _k_int(1000),
                 "subset": _k_str("test"), "trajectory_stride": _k_int(0)},
    "uq": {**_DATA, **_SPLIT, **_SAMPLING, "seed": _k_int(0), "n_draws": _k_int(500),
           "subset": _k_str("test"), "workers": _k_int(1), "retain_draws": _k_bool(False)},
    "evaluate": {**_DATA, **_SPLIT, "seed": _k_int(0), "kind": _k_str("cdm"),
                 "samples": _k_str(""), "subset": _k_str("all"),
                 "thresholds": Key(_floats, (10.0, 25.0))},
    "physics-check": {**_DATA, "samples": _k_str("")},
}


@dataclass
class RunConfig:
    command: str
    values: dict[str, Any]
    schema: CsvSchema

    def __getitem__(self, key):
        return self.values[key]

    def lines(self) -> list[str]:
        """Fully resolved ``key=value`` lines in a stable order."""
        out = [f"{k}={format_value(v)}" for k, v in sorted(self.values.items())]
        for name in COLUMNS:
            if name in self.schema.headers:
                out.append(f"column.{name}={self.schema.headers[name]}")
            if name in self.schema.units:
                out.append(f"unit.{name}={self.schema.units[name]!r}")
        return out

    def digest(self, extra: list[str] = (), exclude=()) -> str:
        # input paths are left out so a digest depends only on file content
        kept = [l for l in self.lines() if l.split("=", 1)[0] not in exclude]
        text = "\n".join([f"command={self.command}", *kept, *extra])
        return hashlib.sha256(text.encode()).hexdigest()[:16]

    def fractions(self) -> tuple[float, float, float]:
        return (self["train_fraction"], self["val_fraction"], self["test_fraction"])

    def train_config(self) -> TrainConfig:
        v = self.values
        kwargs = dict(feature_mode=v["feature_mode"], seed=v["seed"],
                      schedule=v["schedule"], beta_min=v["beta_min"], beta_max=v["beta_max"],
                      slope=v["slope"], ema_mu=v["ema_mu"], embed_width=v["embed_width"],
                      embed_base=v["embed_base"])
        for key in _TRAIN_AUTO:
            if v[key] != FROM_MODEL:
                kwargs[key] = v[key]
        return TrainConfig.published(v["model"], **kwargs)


def parse_text(text: str, source: str = "<config>") -> dict[str, str]:
    raw = {}
    for n, line in enumerate(text.splitlines(), start=1):
        stripped = line.strip()
        if not stripped or stripped.startswith("#"):
            continue
        key, sep, value = stripped.partition("=")
        if not sep or not key.strip():
            raise ConfigError(f"{source}:{n}: expected 'key = value', got {line!r}")
        key = key.strip()
        if key in raw:
            raise ConfigError(f"{source}:{n}: duplicate key {key!r}")
        raw[key] = value.strip()
    return raw


def resolve(command: str, raw: dict[str, str]) -> RunConfig:
    if command not in COMMAND_KEYS:
        raise ConfigError(f"command {command!r} takes no config file")
    keys = COMMAND_KEYS[command]
    values = {k: spec.default for k, spec in keys.items()}
    headers, units = {}, {}
    for key, text in raw.items():
        prefix, dot, name = key.partition(".")
        if dot and prefix in ("column", "unit") and "data" in keys:
            if name not in COLUMNS:
                raise ConfigError(f"unknown column {name!r} in key {key!r}")
            if prefix == "column":
                headers[name] = text
            else:
                try:
                    units[name] = float(text)
                except ValueError:
                    raise ConfigError(f"{key}: not a number: {text!r}") from None
            continue
        if key not in keys:
            raise ConfigError(f"unknown key {key!r} for command {command!r}")
        parse = keys[key].parse
        if command == "train" and key in _TRAIN_AUTO and text != FROM_MODEL:
            parse = {"lr": float, "hidden": _ints}.get(key, int)
        if command in ("generate", "uq") and key == "T" and text != FROM_MODEL:
            parse = int
        try:
            values[key] = parse(text)
        except ValueError as exc:
            raise ConfigError(f"{key}: {exc}") from None
    schema = CsvSchema(headers, units, values.get("delimiter", ","))
    cfg = RunConfig(command, values, schema)
    if command == "train":
        # surface the recipe the run actually uses
        tc = cfg.train_config()
        for key in _TRAIN_AUTO:
            values[key] = getattr(tc, key)
    return cfg


def load(command: str, path: str | None, overrides: dict[str, str] | None = None) -> RunConfig:
    raw = {}
    if path:
        p = Path(path)
        if not p.is_file():
            raise ConfigError(f"config file not found: {path}")
        raw = parse_text(p.read_text(encoding="utf-8"), str(p))
    raw.update(overrides or {})
    return resolve(command, raw)

"""Experiment configuration and its key = value document format.

A config file is a flat, human-readable document: one ``key = value`` pair
per line, ``#`` comments, lists comma-separated. The clean SNR condition is
spelled ``clean``. Every training constant can be overridden here.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, fields, replace
from pathlib import Path

import numpy as np

from ..audio_io import CLEAN, SWEEP_SNRS_DB
from ..errors import ConfigError

_VALID_TASKS = ("binary", "four_class", "regression")


def derive_seed(master: int, *tags) -> int:
    """Stable sub-seed from a master seed and a sequence of string/int tags."""
    parts = [int(master)]
    for tag in tags:
        if isinstance(tag, str):
            value = 0
            for ch in tag:
                value = (value * 1000003 + ord(ch)) % (2**31)
            parts.append(value)
        else:
            parts.append(int(tag) & 0x7FFFFFFF)
    return int(np.random.SeedSequence(tuple(parts)).generate_state(1)[0])


def snr_label(snr_db: float) -> str:
    if snr_db == CLEAN:
        return "clean"
    if float(snr_db).is_integer():
        return str(int(snr_db))
    return repr(float(snr_db))


def parse_snr(text: str) -> float:
    text = text.strip().lower()
    if text in ("clean", "inf", "infinity"):
        return CLEAN
    try:
        return float(text)
    except ValueError:
        raise ConfigError(f"bad SNR value {text!r}")


@dataclass(frozen=True)
class ExperimentConfig:
    task: str = "binary"
    archs: tuple[str, ...] = ("cnn",)
    # each entry is one feature kind or "kind+kind" for a fusion cell
    features: tuple[str, ...] = ("spectrogram",)
    snrs_db: tuple[float, ...] = SWEEP_SNRS_DB
    epochs: int = 100
    batch_size: int = 256
    learning_rate: float = 1e-4
    beta1: float = 0.9
    beta2: float = 0.999
    epsilon: float = 1e-8
    n_folds: int = 5
    seed: int = 7
    dtype: str = "float64"
    width_scale: int = 1
    pretrain_epochs: int = 0            # 0: use `epochs` for fusion branch pretraining
    finetune_epochs: int = 0            # 0: use `epochs` for fusion fine-tuning
    early_stop_patience: int = 0        # 0: fixed-epoch training
    validation_fraction: float = 0.2
    train_snr_augment: bool = False     # mix noise into training clips; off by default
    mix_after_resample: bool = True     # pipeline order, echoed in reports
    per_block_eval: bool = False        # score 20-frame blocks instead of clips
    gru_concat_width: bool = True       # BiGRU width read as the concatenated size
    manifest: str = ""
    audio_root: str = ""
    noise: str = ""                     # WAV path, or "pink:<seed>:<seconds>"
    workers: int = 1

    def __post_init__(self):
        if self.task not in _VALID_TASKS:
            raise ConfigError(f"task must be one of {_VALID_TASKS}, got {self.task!r}")
        if self.epochs < 1 or self.batch_size < 1 or self.n_folds < 1:
            raise ConfigError("epochs, batch_size and n_folds must be positive")
        if self.dtype not in ("float32", "float64"):
            raise ConfigError(f"dtype must be float32 or float64, got {self.dtype!r}")
        for snr in self.snrs_db:
            if snr != CLEAN and not math.isfinite(snr):
                raise ConfigError(f"SNR values must be finite or clean, got {snr}")

    def echo(self) -> dict:
        """JSON-safe dump of every setting, for report embedding."""
        out = {}
        for f in fields(self):
            value = getattr(self, f.name)
            if f.name == "snrs_db":
                value = [snr_label(v) for v in value]
            elif isinstance(value, tuple):
                value = list(value)
            out[f.name] = value
        return out


_LIST_FIELDS = {"archs", "features"}


def parse_config_text(text: str, base: ExperimentConfig | None = None) -> ExperimentConfig:
    config = base or ExperimentConfig()
    updates = {}
    for line_number, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, value = line.partition("=")
        if not sep:
            raise ConfigError(f"line {line_number}: expected 'key = value', got {raw!r}")
        updates[key.strip()] = value.strip()
    return apply_overrides(config, updates)


def apply_overrides(config: ExperimentConfig, updates: dict[str, str]) -> ExperimentConfig:
    valid = {f.name: f for f in fields(ExperimentConfig)}
    parsed = {}
    for key, value in updates.items():
        if key not in valid:
            raise ConfigError(f"unknown config key {key!r}")
        parsed[key] = _parse_value(key, value, valid[key].type)
    return replace(config, **parsed)


def _parse_value(key: str, value: str, annotation: str):
    if key == "snrs_db":
        return tuple(parse_snr(v) for v in value.split(","))
    if key in _LIST_FIELDS:
        return tuple(v.strip() for v in value.split(",") if v.strip())
    if annotation == "int":
        try:
            return int(value)
        except ValueError:
            raise ConfigError(f"config key {key!r} expects an integer, got {value!r}")
    if annotation == "float":
        try:
            return float(value)
        except ValueError:
            raise ConfigError(f"config key {key!r} expects a number, got {value!r}")
    if annotation == "bool":
        lowered = value.strip().lower()
        if lowered in ("true", "yes", "1", "on"):
            return True
        if lowered in ("false", "no", "0", "off"):
            return False
        raise ConfigError(f"config key {key!r} expects true/false, got {value!r}")
    return value


def load_config(path, base: ExperimentConfig | None = None) -> ExperimentConfig:
    return parse_config_text(Path(path).read_text(), base=base)


def config_to_text(config: ExperimentConfig) -> str:
    lines = []
    for f in fields(config):
        value = getattr(config, f.name)
        if f.name == "snrs_db":
            value = ", ".join(snr_label(v) for v in value)
        elif isinstance(value, tuple):
            value = ", ".join(str(v) for v in value)
        lines.append(f"{f.name} = {value}")
    return "\n".join(lines) + "\n"


def save_config(config: ExperimentConfig, path) -> None:
    Path(path).write_text(config_to_text(config))

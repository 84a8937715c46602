"""Run configuration: JSON parsing with strict validation and named presets.

Presets expand to the five studied pooling/attention combinations:

    model1  eos_last              + causal
    model2  last_layer_trainable  + causal
    model3  multi_layer_trainable + causal
    model4  last_layer_trainable  + bidirectional
    model5  multi_layer_trainable + bidirectional

Unknown keys are rejected everywhere so a typo cannot silently change an
experiment.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

from .pooling import (
    EOS_LAST,
    LAST_LAYER_TRAINABLE,
    MULTI_LAYER_TRAINABLE,
    PoolerConfig,
)
from .training import TrainConfig
from .transformer import BIDIRECTIONAL, CAUSAL, ConfigError, ModelConfig

PRESETS: dict[str, tuple[str, str]] = {
    "model1": (EOS_LAST, CAUSAL),
    "model2": (LAST_LAYER_TRAINABLE, CAUSAL),
    "model3": (MULTI_LAYER_TRAINABLE, CAUSAL),
    "model4": (LAST_LAYER_TRAINABLE, BIDIRECTIONAL),
    "model5": (MULTI_LAYER_TRAINABLE, BIDIRECTIONAL),
}

_MODEL_KEYS = {
    "n_layers": int,
    "hidden_dim": int,
    "n_heads": int,
    "ffn_dim": int,
    "vocab_size": int,
    "max_seq_len": int,
    "attention_mode": str,
}
_POOL_KEYS = {
    "strategy": str,
    "latent_count": int,
    "inner_dim": int,
    "pool_heads": int,
    "mlp_hidden": int,
    "out_dim": int,
}
_TRAIN_KEYS = {
    "learning_rate": float,
    "batch_size": int,
    "max_steps": int,
    "temperature": float,
    "seed": int,
    "weight_decay": float,
}
_TOP_KEYS = {"preset", "model_id", "model", "pooling", "train"}


@dataclass(frozen=True)
class RunConfig:
    model: ModelConfig
    pooling: PoolerConfig
    train: TrainConfig
    model_id: str = "model"

    def to_dict(self) -> dict:
        return {
            "model_id": self.model_id,
            "model": self.model.to_dict(),
            "pooling": self.pooling.to_dict(),
            "train": self.train.to_dict(),
        }


def _check_section(name: str, obj: dict, allowed: dict) -> dict:
    if not isinstance(obj, dict):
        raise ConfigError(f"section {name!r} must be an object")
    out = {}
    for key, value in obj.items():
        if key not in allowed:
            raise ConfigError(f"unknown key {name}.{key}")
        want = allowed[key]
        if want is float and isinstance(value, int):
            value = float(value)
        if not isinstance(value, want):
            raise ConfigError(f"{name}.{key} must be {want.__name__}")
        out[key] = value
    return out


def preset_overrides(preset: str) -> tuple[str, str]:
    if preset not in PRESETS:
        raise ConfigError(f"unknown preset {preset!r}, expected one of {sorted(PRESETS)}")
    return PRESETS[preset]


def run_config_from_dict(raw: dict) -> RunConfig:
    if not isinstance(raw, dict):
        raise ConfigError("config root must be a JSON object")
    unknown = set(raw) - _TOP_KEYS
    if unknown:
        raise ConfigError(f"unknown top-level key(s): {sorted(unknown)}")

    model_kwargs = _check_section("model", raw.get("model", {}), _MODEL_KEYS)
    pool_kwargs = _check_section("pooling", raw.get("pooling", {}), _POOL_KEYS)
    train_kwargs = _check_section("train", raw.get("train", {}), _TRAIN_KEYS)
    model_id = raw.get("model_id", raw.get("preset", "model"))
    if not isinstance(model_id, str):
        raise ConfigError("model_id must be a string")

    if "preset" in raw:
        strategy, mode = preset_overrides(raw["preset"])
        pool_kwargs["strategy"] = strategy
        model_kwargs["attention_mode"] = mode

    model = ModelConfig(**model_kwargs)
    # pooled embeddings default to the backbone width unless overridden
    pool_kwargs.setdefault("inner_dim", model.hidden_dim)
    pool_kwargs.setdefault("latent_count", model.hidden_dim)
    pool_kwargs.setdefault("mlp_hidden", 2 * pool_kwargs["inner_dim"])
    pool_kwargs.setdefault("out_dim", model.hidden_dim)
    pooling = PoolerConfig(**pool_kwargs)
    train = TrainConfig(**train_kwargs)

    from .pooling import validate_strategy

    validate_strategy(pooling.strategy, model.attention_mode)
    return RunConfig(model=model, pooling=pooling, train=train, model_id=model_id)


def load_run_config(path) -> RunConfig:
    with open(path, encoding="utf-8") as fh:
        try:
            raw = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}: invalid JSON: {exc}") from exc
    return run_config_from_dict(raw)

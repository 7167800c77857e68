"""JSON experiment-config parsing and echoing."""

from __future__ import annotations

import json
import os
from dataclasses import replace

from .models import ModelSpec, TrainConfig
from .pipeline import CvConfig, EpochWindow, PreprocessingToggles
from .studies import ExperimentConfig


class ConfigError(ValueError):
    pass


def _model_name(doc: dict) -> str:
    if "name" in doc:
        return doc["name"]
    variant = doc["variant"]
    if variant == "ffn":
        return f"ffn_l{len(doc.get('hidden_sizes', ())) + 1}"
    return variant


def parse_model(doc: dict) -> tuple[str, ModelSpec]:
    doc = dict(doc)
    name = _model_name(doc)
    doc.pop("name", None)
    train_doc = doc.pop("train", {})
    try:
        spec = ModelSpec(train=TrainConfig(**train_doc), **doc)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"bad model spec {name!r}: {exc}") from exc
    return name, spec


def parse_experiment(doc: dict, base_dir: str = ".", seed: int | None = None,
                     jobs: int = 1) -> ExperimentConfig:
    try:
        manifests = tuple(
            p if os.path.isabs(p) else os.path.join(base_dir, p)
            for p in doc["manifests"]
        )
        if not manifests:
            raise ConfigError("at least one manifest is required")
        models = tuple(parse_model(m) for m in doc.get(
            "models", [{"variant": "elastic_net"}]))
        if not models:
            raise ConfigError("at least one model is required")
        pre = PreprocessingToggles(**doc.get("preprocessing", {}))
        cv = CvConfig(**doc.get("cv", {}))
        window = EpochWindow(**doc.get("epoch_window", {}))
    except ConfigError:
        raise
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigError(f"invalid experiment config: {exc}") from exc
    if seed is not None:
        cv = replace(cv, seed=seed)
    phone_pairs = doc.get("phone_pairs", "auto")
    if phone_pairs != "auto":
        phone_pairs = tuple(tuple(p) for p in phone_pairs)
    return ExperimentConfig(
        manifests=manifests,
        models=models,
        phone_pairs=phone_pairs,
        preprocessing=pre,
        cv=cv,
        min_count=int(doc.get("min_count", 50)),
        window=window,
        jobs=jobs,
    )


def echo_experiment(cfg: ExperimentConfig) -> dict:
    """Fully resolved config; re-parsing it reproduces the run."""
    models = []
    for name, spec in cfg.models:
        models.append({
            "name": name,
            "variant": spec.variant,
            "alpha": spec.alpha,
            "l1_ratio": spec.l1_ratio,
            "C": spec.C,
            "gamma": spec.gamma,
            "shrinkage": spec.shrinkage,
            "hidden_sizes": list(spec.hidden_sizes),
            "kernel": spec.kernel,
            "stride": spec.stride,
            "filters_per_channel": spec.filters_per_channel,
            "train": {
                "learning_rate": spec.train.learning_rate,
                "weight_decay": spec.train.weight_decay,
                "max_epochs": spec.train.max_epochs,
                "patience": spec.train.patience,
                "val_fraction": spec.train.val_fraction,
                "seed": spec.train.seed,
            },
        })
    return {
        "manifests": list(cfg.manifests),
        "models": models,
        "phone_pairs": (cfg.phone_pairs if cfg.phone_pairs == "auto"
                        else [list(p) for p in cfg.phone_pairs]),
        "preprocessing": {
            "sensor_kinds": list(cfg.preprocessing.sensor_kinds),
            "wavelet": cfg.preprocessing.wavelet,
            "decimation_factor": cfg.preprocessing.decimation_factor,
            "band_limit": cfg.preprocessing.band_limit,
        },
        "cv": {"k": cfg.cv.k, "seed": cfg.cv.seed},
        "min_count": cfg.min_count,
        "epoch_window": {"tmin": cfg.window.tmin, "tmax": cfg.window.tmax},
    }


def load_json(path: str) -> dict:
    try:
        with open(path, encoding="utf-8") as f:
            return json.load(f)
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc


def write_echo(cfg: ExperimentConfig, out_dir: str) -> str:
    os.makedirs(out_dir, exist_ok=True)
    path = os.path.join(out_dir, "config_echo.json")
    with open(path, "w", encoding="utf-8") as f:
        json.dump(echo_experiment(cfg), f, indent=2, sort_keys=True)
        f.write("\n")
    return path

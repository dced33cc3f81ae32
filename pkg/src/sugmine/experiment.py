"""Experiment configuration files, presets and run manifests."""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

from . import __version__
from .classifier import ModelConfig, TrainConfig
from .errors import ConfigError
from .preprocess import STAGES, PipelineConfig

PRESETS = ("subtask_a", "subtask_b")
TOP_LEVEL_KEYS = {
    "preset", "description", "train", "val", "test", "vectors",
    "seed", "members", "model", "training", "pipeline",
}
RESOURCE_PREFIX = "resource:"


def load_preset(name: str) -> dict:
    if name not in PRESETS:
        raise ConfigError(f"unknown preset {name!r}; available: {', '.join(PRESETS)}")
    text = resources.files("sugmine.presets").joinpath(f"{name}.json").read_text(encoding="utf-8")
    return json.loads(text)


def resource_path(name: str) -> Path:
    return Path(str(resources.files("sugmine.resources").joinpath(name)))


def _merge(base: dict, override: dict) -> dict:
    out = dict(base)
    for k, v in override.items():
        if isinstance(v, dict) and isinstance(out.get(k), dict):
            out[k] = _merge(out[k], v)
        else:
            out[k] = v
    return out


def _resolve_path(value, root: Path) -> str | None:
    if value is None:
        return None
    if not isinstance(value, str) or not value:
        raise ConfigError(f"paths must be non-empty strings, got {value!r}")
    if value.startswith(RESOURCE_PREFIX):
        return str(resource_path(value[len(RESOURCE_PREFIX):]))
    p = Path(value).expanduser()
    return str((p if p.is_absolute() else root / p).resolve())


def sha256_file(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 16), b""):
            h.update(chunk)
    return h.hexdigest()


@dataclass
class ExperimentConfig:
    train: str
    val: str | None = None
    test: str | None = None
    vectors: str | None = None
    seed: int = 0
    members: int = 1
    model: ModelConfig = field(default_factory=ModelConfig)
    training: TrainConfig = field(default_factory=TrainConfig)
    pipeline: PipelineConfig = field(default_factory=PipelineConfig)
    preset: str | None = None

    def to_dict(self) -> dict:
        return {
            "preset": self.preset,
            "train": self.train,
            "val": self.val,
            "test": self.test,
            "vectors": self.vectors,
            "seed": self.seed,
            "members": self.members,
            "model": self.model.to_dict(),
            "training": self.training.to_dict(),
            "pipeline": {"enabled_stages": list(self.pipeline.enabled_stages)},
        }

    def config_hash(self) -> str:
        blob = json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode("utf-8")).hexdigest()

    def member_seed(self, index: int) -> int:
        return self.seed + index

    def input_hashes(self) -> dict:
        return {k: sha256_file(p) for k in ("train", "val", "test", "vectors") if (p := getattr(self, k))}


def experiment_from_dict(raw: dict, root: Path, seed: int | None = None, check_paths: bool = True) -> ExperimentConfig:
    if not isinstance(raw, dict):
        raise ConfigError("experiment config must be a JSON object")
    unknown = sorted(set(raw) - TOP_LEVEL_KEYS)
    if unknown:
        raise ConfigError(f"unknown config key(s): {', '.join(unknown)}")
    base = load_preset(raw["preset"]) if raw.get("preset") else {}
    model_d = _merge(base.get("model", {}), raw.get("model") or {})
    training_d = _merge(base.get("training", {}), raw.get("training") or {})
    if seed is None:
        seed = raw.get("seed", training_d.get("seed", 0))
    if not isinstance(seed, int) or isinstance(seed, bool) or seed < 0:
        raise ConfigError(f"seed must be a nonnegative integer, got {seed!r}")
    training_d["seed"] = seed
    members = raw.get("members", 1)
    if not isinstance(members, int) or members < 1:
        raise ConfigError(f"members must be a positive integer, got {members!r}")
    pipeline_d = raw.get("pipeline") or {}
    unknown = sorted(set(pipeline_d) - {"enabled_stages"})
    if unknown:
        raise ConfigError(f"unknown pipeline key(s): {', '.join(unknown)}")
    if "train" not in raw:
        raise ConfigError("config needs a 'train' dataset path")
    try:
        cfg = ExperimentConfig(
            train=_resolve_path(raw["train"], root),
            val=_resolve_path(raw.get("val"), root),
            test=_resolve_path(raw.get("test"), root),
            vectors=_resolve_path(raw.get("vectors"), root),
            seed=seed,
            members=members,
            model=ModelConfig.from_dict(model_d),
            training=TrainConfig.from_dict(training_d),
            pipeline=PipelineConfig(tuple(pipeline_d.get("enabled_stages", STAGES))),
            preset=raw.get("preset"),
        )
    except TypeError as exc:
        raise ConfigError(f"invalid config value: {exc}") from None
    if cfg.model.embedding_source == "pretrained_file" and cfg.vectors is None:
        raise ConfigError("embedding_source 'pretrained_file' requires a 'vectors' path")
    if check_paths:
        for key in ("train", "val", "test", "vectors"):
            p = getattr(cfg, key)
            if p is not None and not Path(p).is_file():
                raise ConfigError(f"{key} path does not exist: {p}")
    return cfg


def _read_config(path: Path) -> dict:
    try:
        raw = json.loads(path.read_text(encoding="utf-8"))
    except FileNotFoundError:
        raise ConfigError(f"config file not found: {path}") from None
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON: {exc}") from None
    if isinstance(raw, dict) and "config_hash" in raw and "config" in raw:
        raw = {k: v for k, v in raw["config"].items() if v is not None}
    return raw


def load_experiment(path, seed: int | None = None, check_paths: bool = True) -> ExperimentConfig:
    """Read an experiment config, or the ``config`` section of a run manifest."""
    path = Path(path)
    return experiment_from_dict(_read_config(path), path.parent, seed=seed, check_paths=check_paths)


def load_pipeline(path) -> PipelineConfig:
    """Only the preprocessing part of an experiment config or run manifest."""
    raw = _read_config(Path(path))
    if not isinstance(raw, dict):
        raise ConfigError("experiment config must be a JSON object")
    pipeline_d = raw.get("pipeline") or {}
    unknown = sorted(set(pipeline_d) - {"enabled_stages"})
    if unknown:
        raise ConfigError(f"unknown pipeline key(s): {', '.join(unknown)}")
    return PipelineConfig(tuple(pipeline_d.get("enabled_stages", STAGES)))


def build_manifest(cfg: ExperimentConfig, members: list) -> dict:
    return {
        "format": "sugmine-run/1",
        "package_version": __version__,
        "config": cfg.to_dict(),
        "config_hash": cfg.config_hash(),
        "seed": cfg.seed,
        "inputs": cfg.input_hashes(),
        "members": members,
    }

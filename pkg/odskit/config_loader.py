"""YAML configuration loader with env var interpolation."""

import dataclasses
import os
import re
import yaml
from pathlib import Path
from typing import Any, Optional

from odskit.config_schema import (
    AdversarialTrainingConfig, AttackSpec, BlackboxAttackConfig, DatasetSpec, DiversitySpec,
    ExperimentConfig, ModelSpec, TargetSpec, TrainConfig, WhiteboxAttackConfig
)


class ConfigError(Exception):
    """Configuration loading error."""
    pass


def _get_config_search_paths() -> list:
    """Experiment directory first, then the per-user config directory."""
    paths = [Path("./odskit.yaml")]
    xdg_config = os.environ.get("XDG_CONFIG_HOME")
    if xdg_config:
        paths.append(Path(xdg_config) / "odskit" / "config.yaml")
    paths.append(Path.home() / ".config" / "odskit" / "config.yaml")
    return paths


def load_config(cli_path: "Optional[str]" = None) -> ExperimentConfig:
    """Load configuration from YAML file.

    Search order:
    1. CLI-specified path
    2. ./odskit.yaml
    3. XDG_CONFIG_HOME/odskit/config.yaml, then ~/.config/odskit/config.yaml
    """
    search_paths = _get_config_search_paths()

    if cli_path:
        config_path = Path(cli_path)
        if not config_path.exists():
            raise ConfigError(f"Config file not found: {cli_path}")
    else:
        config_path = None
        for path in search_paths:
            if path.exists():
                config_path = path
                break

        if config_path is None:
            searched = "\n  ".join(str(p) for p in search_paths)
            raise ConfigError(
                f"No config file found. Searched:\n  {searched}\n\n"
                "Create odskit.yaml or specify --config path"
            )

    return _parse_config(config_path)


def _parse_config(path: Path) -> ExperimentConfig:
    """Parse YAML config file."""
    try:
        with open(path) as f:
            raw = yaml.safe_load(f)
    except yaml.YAMLError as e:
        raise ConfigError(f"Invalid YAML in {path}: {e}")

    if raw is None:
        raw = {}
    if not isinstance(raw, dict):
        raise ConfigError(f"Config must be a YAML mapping, got {type(raw).__name__}")

    return parse_document(_interpolate(raw))


def parse_document(raw: dict) -> ExperimentConfig:
    """Build an ExperimentConfig from an already-loaded mapping."""
    top_level = {f.name for f in dataclasses.fields(ExperimentConfig)}
    _check_keys(raw, top_level, "top level")

    surrogates_raw = raw.get("surrogates", []) or []
    attacks_raw = raw.get("attacks", []) or []
    if not isinstance(surrogates_raw, list) or not isinstance(attacks_raw, list):
        raise ConfigError("'surrogates' and 'attacks' must be lists")

    scalars = {k: raw[k] for k in ("budgets", "eval_size", "seed", "jobs", "output_dir",
                                    "log_level", "log_path") if k in raw}
    return _build(
        ExperimentConfig, "top level",
        dataset=_build(DatasetSpec, "dataset", **_section(raw, "dataset")),
        target=_parse_target(_section(raw, "target")),
        surrogates=[_parse_model(s, f"surrogates[{i}]") for i, s in enumerate(surrogates_raw)],
        attacks=[_parse_attack(a, f"attacks[{i}]") for i, a in enumerate(attacks_raw)],
        diversity=_build(DiversitySpec, "diversity", **_section(raw, "diversity")),
        **scalars,
    )


def apply_overrides(config: ExperimentConfig, seed: Optional[int] = None, out: Optional[str] = None,
                    jobs: Optional[int] = None) -> ExperimentConfig:
    """CLI flags win over the document."""
    changes = {}
    if seed is not None:
        changes["seed"] = seed
    if out is not None:
        changes["output_dir"] = out
    if jobs is not None:
        if jobs < 1:
            raise ConfigError(f"--jobs must be >= 1, got {jobs}")
        changes["jobs"] = jobs
    return dataclasses.replace(config, **changes) if changes else config


def _section(raw: dict, name: str) -> dict:
    value = raw.get(name) or {}
    if not isinstance(value, dict):
        raise ConfigError(f"Section '{name}' must be a mapping")
    return dict(value)


def _check_keys(raw: dict, allowed: set, section: str) -> None:
    unknown = sorted(set(raw) - allowed)
    if unknown:
        raise ConfigError(f"Unknown key(s) in {section}: {', '.join(unknown)}")


def _build(cls, section: str, **kwargs) -> Any:
    _check_keys(kwargs, {f.name for f in dataclasses.fields(cls)}, section)
    try:
        return cls(**kwargs)
    except (TypeError, ValueError) as e:
        raise ConfigError(f"Invalid {section}: {e}")


def _parse_train(raw: dict, section: str) -> TrainConfig:
    raw = dict(raw)
    adversarial = raw.pop("adversarial", None)
    if adversarial is not None:
        raw["adversarial"] = _build(AdversarialTrainingConfig, f"{section}.adversarial", **adversarial)
    return _build(TrainConfig, section, **raw)


def _parse_model(raw: dict, section: str) -> ModelSpec:
    if not isinstance(raw, dict) or "name" not in raw:
        raise ConfigError(f"{section} must be a mapping with a 'name'")
    raw = dict(raw)
    train = _parse_train(raw.pop("train", {}) or {}, f"{section}.train")
    return _build(ModelSpec, section, train=train, **raw)


def _parse_target(raw: dict) -> TargetSpec:
    _check_keys(raw, {"model", "robust"}, "target")
    kwargs = {}
    if "model" in raw:
        kwargs["model"] = _parse_model({"name": "target", **(raw["model"] or {})}, "target.model")
    if "robust" in raw:
        robust = raw["robust"]
        kwargs["robust"] = None if robust in (None, False) else \
            _build(AdversarialTrainingConfig, "target.robust", **robust)
    return _build(TargetSpec, "target", **kwargs)


def _parse_attack(raw: dict, section: str) -> AttackSpec:
    if not isinstance(raw, dict) or "name" not in raw:
        raise ConfigError(f"{section} must be a mapping with a 'name'")
    raw = dict(raw)
    section = f"attack '{raw['name']}'"
    if "whitebox" in raw:
        raw["whitebox"] = _build(WhiteboxAttackConfig, f"{section}.whitebox", **(raw["whitebox"] or {}))
    if "blackbox" in raw:
        raw["blackbox"] = _build(BlackboxAttackConfig, f"{section}.blackbox", **(raw["blackbox"] or {}))
    return _build(AttackSpec, section, **raw)


def _interpolate(value: Any) -> Any:
    """Expand ${VAR} references in every string of a loaded document."""
    if isinstance(value, dict):
        return {k: _interpolate(v) for k, v in value.items()}
    if isinstance(value, list):
        return [_interpolate(v) for v in value]
    if not isinstance(value, str):
        return value

    pattern = re.compile(r'\$\{([^}]+)\}')

    def replacer(match):
        var_name = match.group(1)
        env_value = os.environ.get(var_name)
        if env_value is None:
            raise ConfigError(f"Environment variable not set: {var_name}")
        return env_value

    return pattern.sub(replacer, value)

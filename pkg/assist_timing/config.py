# -*- coding: utf-8 -*-
"""Engine weights and provider settings: defaults, file loading, environment overrides."""

from __future__ import annotations

import math
import os
import logging
from dataclasses import dataclass, field, fields, replace
from pathlib import Path
from typing import Any, Mapping

import yaml

logger = logging.getLogger(__name__)

# Default configuration shipped with the tool (read-only)
DEFAULT_CONFIG_PATH = os.path.join(
    os.path.dirname(os.path.dirname(__file__)), "config", "default_config.yaml"
)

ENV_PREFIX = "ASSIST_TIMING_"
ENV_SEED = ENV_PREFIX + "SEED"
ENV_ENDPOINT = ENV_PREFIX + "ENDPOINT"

# Tolerance for alpha + beta + gamma == 1
_WEIGHT_SUM_TOLERANCE = 1e-9

_PROVIDER_MODES = ("mock", "remote")


class ConfigError(ValueError):
    """Invalid configuration value or file."""


@dataclass(frozen=True)
class WeightsConfig:
    """Every tunable constant of the memory model and the timing predictor."""

    alpha: float = 0.3
    """Composite weight of recency."""
    beta: float = 0.4
    """Composite weight of relevance."""
    gamma: float = 0.3
    """Composite weight of importance."""
    lambda_: float = 0.6
    """Binding weight of episode similarity against member similarity."""
    theta: float = 0.5
    """Binding threshold; a chunk is joined only when its score exceeds it."""
    T: float = 30.0
    """Retention bound in seconds for linear recency decay."""
    w_importance: float = 0.6
    w_relevance: float = 0.4
    utility_threshold: float = 0.75
    dedup_threshold: float = 0.95
    capacity_items: int = 7
    capacity_chunks: int = 4
    embedding_dim: int = 64
    defer_ttl: float = 60.0
    """Seconds a candidate may wait in the deferred queue; ``inf`` disables expiry."""
    seed: int = 0

    def validate(self) -> "WeightsConfig":
        if abs(self.alpha + self.beta + self.gamma - 1.0) > _WEIGHT_SUM_TOLERANCE:
            raise ConfigError(
                f"alpha + beta + gamma must equal 1 (got {self.alpha + self.beta + self.gamma!r})"
            )
        for name in ("alpha", "beta", "gamma", "w_importance", "w_relevance"):
            if getattr(self, name) < 0:
                raise ConfigError(f"{name} must be non-negative")
        for name in ("lambda_", "theta", "dedup_threshold"):
            value = getattr(self, name)
            if not 0.0 <= value <= 1.0:
                raise ConfigError(f"{_public_name(name)} must lie in [0,1] (got {value!r})")
        if not self.T > 0:
            raise ConfigError("T must be positive")
        if math.isnan(self.defer_ttl) or self.defer_ttl < 0:
            raise ConfigError("defer_ttl must be non-negative")
        for name in ("capacity_items", "capacity_chunks", "embedding_dim"):
            if getattr(self, name) < 1:
                raise ConfigError(f"{name} must be at least 1")
        return self

    def with_overrides(self, overrides: Mapping[str, Any] | None) -> "WeightsConfig":
        """Validated copy with *overrides* (public key names) applied."""
        if not overrides:
            return self
        return replace(self, **_coerce_weights(overrides, source="overrides")).validate()

    def to_dict(self) -> dict[str, Any]:
        out = {}
        for f in fields(self):
            value = getattr(self, f.name)
            if f.name == "defer_ttl" and math.isinf(value):
                value = None
            out[_public_name(f.name)] = value
        return out


@dataclass(frozen=True)
class ProviderSettings:
    mode: str = "mock"
    endpoint: str | None = None
    timeout_s: float = 10.0
    cache_path: str | None = None

    def validate(self) -> "ProviderSettings":
        if self.mode not in _PROVIDER_MODES:
            raise ConfigError(f"provider.mode must be one of {_PROVIDER_MODES} (got {self.mode!r})")
        if self.mode == "remote" and not self.endpoint:
            raise ConfigError("provider.endpoint is required when provider.mode is 'remote'")
        if not self.timeout_s > 0:
            raise ConfigError("provider.timeout_s must be positive")
        return self


@dataclass(frozen=True)
class AppConfig:
    weights: WeightsConfig = field(default_factory=WeightsConfig)
    provider: ProviderSettings = field(default_factory=ProviderSettings)


def _public_name(attr: str) -> str:
    return "lambda" if attr == "lambda_" else attr


def _attr_name(key: str) -> str:
    return "lambda_" if key == "lambda" else key


_WEIGHT_TYPES = {f.name: f.type for f in fields(WeightsConfig)}


def _coerce_weights(data: Mapping[str, Any], source: str) -> dict[str, Any]:
    """Convert public keys to typed dataclass kwargs, rejecting unknown keys."""
    out: dict[str, Any] = {}
    for key, raw in data.items():
        attr = _attr_name(str(key))
        if attr not in _WEIGHT_TYPES:
            raise ConfigError(f"unknown configuration key '{key}' in {source}")
        try:
            if attr == "defer_ttl":
                out[attr] = math.inf if raw is None or raw == "inf" else float(raw)
            elif _WEIGHT_TYPES[attr] == "int":
                if isinstance(raw, bool) or (isinstance(raw, float) and not raw.is_integer()):
                    raise TypeError(raw)
                out[attr] = int(raw)
            else:
                if isinstance(raw, bool):
                    raise TypeError(raw)
                out[attr] = float(raw)
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"invalid value for '{key}' in {source}: {raw!r}") from exc
    return out


def _parse_provider(data: Any, source: str) -> ProviderSettings:
    if data is None:
        return ProviderSettings()
    if not isinstance(data, dict):
        raise ConfigError(f"'provider' section in {source} must be a mapping")
    known = {f.name for f in fields(ProviderSettings)}
    unknown = set(data) - known
    if unknown:
        raise ConfigError(f"unknown provider key(s) {sorted(unknown)} in {source}")
    try:
        timeout = float(data.get("timeout_s", 10.0))
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"invalid provider.timeout_s in {source}") from exc
    return ProviderSettings(
        mode=str(data.get("mode", "mock")),
        endpoint=data.get("endpoint"),
        timeout_s=timeout,
        cache_path=data.get("cache_path"),
    )


def parse_config(data: Any, source: str = "<config>") -> AppConfig:
    """Build an ``AppConfig`` from an already-decoded mapping."""
    if data is None:
        data = {}
    if not isinstance(data, dict):
        raise ConfigError(f"configuration in {source} must be a mapping")
    data = dict(data)
    provider = _parse_provider(data.pop("provider", None), source)
    weights = WeightsConfig(**_coerce_weights(data, source)).validate()
    return AppConfig(weights=weights, provider=provider.validate())


def apply_env_overrides(config: AppConfig, environ: Mapping[str, str] | None = None) -> AppConfig:
    """Apply ``ASSIST_TIMING_SEED`` and ``ASSIST_TIMING_ENDPOINT``; nothing else is read."""
    env = os.environ if environ is None else environ
    weights, provider = config.weights, config.provider
    if env.get(ENV_SEED):
        try:
            weights = replace(weights, seed=int(env[ENV_SEED]))
        except ValueError as exc:
            raise ConfigError(f"{ENV_SEED} must be an integer (got {env[ENV_SEED]!r})") from exc
    if env.get(ENV_ENDPOINT):
        provider = replace(provider, endpoint=env[ENV_ENDPOINT])
    return AppConfig(weights=weights.validate(), provider=provider.validate())


def load_config(path: str | Path | None = None, environ: Mapping[str, str] | None = None) -> AppConfig:
    """Load a YAML or JSON config file and apply environment overrides.

    With *path* ``None`` the shipped ``default_config.yaml`` is used, or the
    built-in defaults if that file is absent.

    Raises:
        FileNotFoundError: *path* was given and does not exist.
        ConfigError: the file is unreadable, unparsable or invalid.
    """
    if path is None:
        if not os.path.isfile(DEFAULT_CONFIG_PATH):
            logger.warning("Default config '%s' missing; using built-in defaults", DEFAULT_CONFIG_PATH)
            return apply_env_overrides(AppConfig(), environ)
        path = DEFAULT_CONFIG_PATH

    path = str(path)
    if not os.path.isfile(path):
        raise FileNotFoundError(path)

    try:
        with open(path, "r", encoding="utf-8") as f:
            data = yaml.safe_load(f)
    except (OSError, yaml.YAMLError) as exc:
        raise ConfigError(f"could not parse config file '{path}': {exc}") from exc

    config = parse_config(data, source=path)
    logger.debug("Loaded config from %s", path)
    return apply_env_overrides(config, environ)

"""Configuration utilities for loading and validating hybridzeno.yaml."""

import logging
import os
from dataclasses import fields, replace

import yaml

from .errors import ConfigError
from .simulator import SimConfig
from .spec_lang import EQ_TOL

logger = logging.getLogger(__name__)

CONFIG_FILENAME = "hybridzeno.yaml"

# Settings outside SimConfig, with their defaults
CHECK_DEFAULTS = {
    "eq_tol": EQ_TOL,
    "max_zeno": 3,
    "max_branches": 16,
    "omega_tol": 1e-3,
    "workers": 1,
    "seed": 0,
}

_POSITIVE_FLOATS = ("step", "event_tol", "horizon", "zeno_ratio_tol", "zeno_time_eps", "eq_tol", "omega_tol")
_POSITIVE_INTS = ("max_jumps", "zeno_window", "max_bisections", "max_branches", "workers")
_NONNEGATIVE_INTS = ("max_zeno", "seed")


def default_config() -> dict:
    config = {f.name: f.default for f in fields(SimConfig)}
    config.update(CHECK_DEFAULTS)
    return config


def load_config(path=None) -> dict:
    """
    Load and validate the configuration file.

    Without a path, hybridzeno.yaml in the working directory is used when it
    exists; otherwise the defaults are returned. Values missing from the file
    take their defaults.
    """
    explicit = path is not None
    if path is None:
        path = os.path.join(os.getcwd(), CONFIG_FILENAME)
    config = default_config()
    if not os.path.exists(path):
        if explicit:
            raise ConfigError(f"Configuration file not found: {path}")
        return config

    with open(path, "r") as f:
        try:
            loaded = yaml.safe_load(f)
        except yaml.YAMLError as err:
            raise ConfigError(f"Could not parse {path}: {err}") from err
    if loaded is None:
        loaded = {}
    if not isinstance(loaded, dict):
        raise ConfigError(f"{path} must contain a mapping of setting -> value")

    # YAML reads exponent literals without a dot (1e-9) as strings
    for name in _POSITIVE_FLOATS:
        if isinstance(loaded.get(name), str):
            try:
                loaded[name] = float(loaded[name])
            except ValueError:
                pass

    config.update(loaded)
    validate_config(config)
    logger.debug("Configuration loaded from %s: %s", path, config)
    return config


def validate_config(config: dict):
    """Validate field names, types and ranges; raises ConfigError."""
    known = set(default_config())
    for name in config:
        if name not in known:
            raise ConfigError(f"Unknown configuration field '{name}'")

    for name in _POSITIVE_FLOATS:
        value = config[name]
        if isinstance(value, bool) or not isinstance(value, (int, float)) or not value > 0:
            raise ConfigError(f"{name} must be a positive number, got {value!r}")
    for name in _POSITIVE_INTS + _NONNEGATIVE_INTS:
        value = config[name]
        low = 1 if name in _POSITIVE_INTS else 0
        if isinstance(value, bool) or not isinstance(value, int) or value < low:
            raise ConfigError(f"{name} must be an integer >= {low}, got {value!r}")
    if config["zeno_window"] < 3:
        raise ConfigError(f"zeno_window must be at least 3, got {config['zeno_window']}")
    if not isinstance(config["jump_priority"], bool):
        raise ConfigError(f"jump_priority must be true or false, got {config['jump_priority']!r}")


def sim_config(config: dict, **overrides) -> SimConfig:
    """
    Build a SimConfig from a loaded config; overrides set to None are ignored
    (CLI flag > config file > default).
    """
    base = SimConfig(**{f.name: config[f.name] for f in fields(SimConfig)})
    cfg = replace(base, **{k: v for k, v in overrides.items() if v is not None})
    return cfg.validate()


def setting(config: dict, name: str, override=None):
    return config[name] if override is None else override


def write_config(path, config: dict):
    validate_config(config)
    if os.path.exists(path):
        raise ConfigError(f"{path} already exists")
    with open(path, "w") as f:
        yaml.safe_dump(config, f, default_flow_style=False, sort_keys=False)

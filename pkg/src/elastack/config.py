"""Configuration management for elastack.

This module provides process-wide defaults loaded from environment
variables and .env files. Scenario files (see ``elastack.scenario``)
override these per run.
"""

import logging
import os
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

from elastack.constants import (
    DEFAULT_CHECKPOINT_INTERVAL_NS,
    DEFAULT_STATISTIC_PERIOD_NS,
)

logger = logging.getLogger(__name__)

DEFAULT_SEED = 1
DEFAULT_OUTPUT_DIR = "elastack-out"
DEFAULT_LOG_LEVEL = "WARNING"


def _load_dotenv() -> None:
    """Load environment variables from a .env file if it exists."""
    env_paths = [
        Path.cwd() / ".env",
        Path.home() / ".elastack" / ".env",
    ]

    for env_path in env_paths:
        if not env_path.exists():
            continue
        try:
            with open(env_path) as f:
                for line in f:
                    line = line.strip()
                    if line and not line.startswith("#") and "=" in line:
                        key, _, value = line.partition("=")
                        key = key.strip()
                        value = value.strip().strip('"').strip("'")
                        if key and key not in os.environ:
                            os.environ[key] = value
        except OSError as e:
            logger.warning("Could not read %s: %s", env_path, e)
        break  # Only load from first found .env


_load_dotenv()


def _get_env_str(key: str, default: str) -> str:
    """Get string from environment."""
    return os.environ.get(key, default)


def _get_env_int(key: str, default: int) -> int:
    """Get int from environment."""
    try:
        return int(os.environ.get(key, default))
    except (ValueError, TypeError):
        return default


@dataclass
class RunConfig:
    """Defaults for a simulation run."""

    seed: int = field(default_factory=lambda: _get_env_int("ELASTACK_SEED", DEFAULT_SEED))
    output_dir: str = field(
        default_factory=lambda: _get_env_str("ELASTACK_OUTPUT_DIR", DEFAULT_OUTPUT_DIR)
    )
    log_level: str = field(
        default_factory=lambda: _get_env_str("ELASTACK_LOG_LEVEL", DEFAULT_LOG_LEVEL)
    )


@dataclass
class TimingConfig:
    """Default virtual-time knobs not fixed by a scenario."""

    checkpoint_interval_ns: int = field(
        default_factory=lambda: _get_env_int(
            "ELASTACK_CHECKPOINT_INTERVAL_NS", DEFAULT_CHECKPOINT_INTERVAL_NS
        )
    )
    statistic_period_ns: int = field(
        default_factory=lambda: _get_env_int(
            "ELASTACK_STATISTIC_PERIOD_NS", DEFAULT_STATISTIC_PERIOD_NS
        )
    )


@dataclass
class ElastackConfig:
    """Complete process configuration.

    All settings can be overridden via environment variables or .env file.

    Example .env file:
        ELASTACK_SEED=7
        ELASTACK_OUTPUT_DIR=/tmp/runs
        ELASTACK_LOG_LEVEL=INFO
    """

    run: RunConfig = field(default_factory=RunConfig)
    timing: TimingConfig = field(default_factory=TimingConfig)


_config: Optional[ElastackConfig] = None


def get_config() -> ElastackConfig:
    """Get the global configuration instance.

    Returns:
        ElastackConfig with all settings.
    """
    global _config
    if _config is None:
        _config = ElastackConfig()
    return _config


def reload_config() -> ElastackConfig:
    """Reload configuration from environment.

    Returns:
        New ElastackConfig instance.
    """
    global _config
    _load_dotenv()
    _config = ElastackConfig()
    return _config


ENV_VARS = """
# elastack configuration environment variables
ELASTACK_SEED=1
ELASTACK_OUTPUT_DIR=elastack-out
ELASTACK_LOG_LEVEL=WARNING  # DEBUG, INFO, WARNING, ERROR
ELASTACK_CHECKPOINT_INTERVAL_NS=10000
ELASTACK_STATISTIC_PERIOD_NS=10000000
"""

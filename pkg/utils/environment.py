"""Utility helpers for working with environment variables."""
from __future__ import annotations

import logging
import os
from typing import Optional

from dotenv import load_dotenv

from core.errors import ConfigurationError

load_dotenv()

logger = logging.getLogger("L2S")

_TRUE_VALUES = {"1", "true", "yes", "on"}
_FALSE_VALUES = {"0", "false", "no", "off"}


def get_env_var(name: str, *, required: bool = True, default: Optional[str] = None) -> Optional[str]:
    """Fetch an environment variable with validation."""
    value = os.getenv(name)
    if not value:
        if default is not None:
            logger.debug("Environment variable %s not set; using default.", name)
            return default
        if required:
            logger.warning("Environment variable %s is missing and required.", name)
            raise ConfigurationError(
                f"Required environment variable '{name}' is missing."
            )
        return None
    return value


def get_env_int(name: str, default: int) -> int:
    """Fetch an integer environment variable, falling back to ``default``."""
    raw = get_env_var(name, required=False, default=str(default))
    try:
        return int(raw)
    except ValueError as exc:
        raise ConfigurationError(f"Environment variable {name}={raw!r} is not an integer.") from exc


def get_env_bool(name: str, default: bool) -> bool:
    """Fetch a boolean toggle such as ``L2S_DETERMINISTIC=true``."""
    raw = get_env_var(name, required=False, default="true" if default else "false")
    lowered = raw.strip().lower()
    if lowered in _TRUE_VALUES:
        return True
    if lowered in _FALSE_VALUES:
        return False
    raise ConfigurationError(f"Environment variable {name}={raw!r} is not a boolean.")


__all__ = ["get_env_bool", "get_env_int", "get_env_var"]

"""Runtime configuration for the learned-optimizer toolkit."""
from __future__ import annotations

import pathlib
from dataclasses import dataclass, replace
from typing import Optional

import psutil
from dotenv import load_dotenv

from core.errors import ConfigurationError
from utils.environment import get_env_bool, get_env_int, get_env_var

load_dotenv()


def default_threads() -> int:
    return max(1, psutil.cpu_count(logical=False) or psutil.cpu_count() or 1)


@dataclass(slots=True)
class AppConfig:
    """Process-wide settings read from the environment (and ``.env``)."""

    seed: int
    threads: int
    log_level: str
    log_file: Optional[str]
    deterministic: bool
    output_dir: pathlib.Path

    @classmethod
    def load(cls) -> "AppConfig":
        """Load configuration from the environment with validation."""
        threads = get_env_int("L2S_THREADS", default_threads())
        if threads < 1:
            raise ConfigurationError("L2S_THREADS must be at least 1.")
        return cls(
            seed=get_env_int("L2S_SEED", 0),
            threads=threads,
            log_level=(get_env_var("L2S_LOG_LEVEL", required=False, default="INFO") or "INFO").upper(),
            log_file=get_env_var("L2S_LOG_FILE", required=False),
            deterministic=get_env_bool("L2S_DETERMINISTIC", False),
            output_dir=pathlib.Path(get_env_var("L2S_OUTPUT_DIR", required=False, default="outputs") or "outputs"),
        )

    def with_overrides(self, **overrides) -> "AppConfig":
        """Apply CLI values, ignoring the ones left unset."""
        values = {key: value for key, value in overrides.items() if value is not None}
        if values.get("threads", 1) < 1:
            raise ConfigurationError("--threads must be at least 1.")
        return replace(self, **values)


__all__ = ["AppConfig", "default_threads"]

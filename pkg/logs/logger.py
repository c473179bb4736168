"""Logging helpers for the learned-optimizer toolkit."""
from __future__ import annotations

import logging
import os
import pathlib

LOGGER_NAME = "L2S"
LOG_FILE = pathlib.Path(os.getenv("L2S_LOG_FILE", "logs/l2s.log"))


def setup_logger(
    name: str = LOGGER_NAME,
    level: int | str = logging.INFO,
    log_file: pathlib.Path | str | None = None,
) -> logging.Logger:
    """Configure and return the shared logger.

    The first call installs a file handler and a console handler; later
    calls only adjust the level so every entry point can call this freely.
    """
    logger = logging.getLogger(name)
    if isinstance(level, str):
        level = logging.getLevelName(level.upper())
        if not isinstance(level, int):
            level = logging.INFO
    logger.setLevel(level)
    if logger.handlers:
        return logger

    path = pathlib.Path(log_file) if log_file else LOG_FILE
    path.parent.mkdir(parents=True, exist_ok=True)

    formatter = logging.Formatter(
        "%(asctime)s | %(name)s | %(levelname)s | %(message)s"
    )

    file_handler = logging.FileHandler(path, encoding="utf-8")
    file_handler.setFormatter(formatter)
    logger.addHandler(file_handler)

    console_handler = logging.StreamHandler()
    console_handler.setFormatter(formatter)
    logger.addHandler(console_handler)
    logger.propagate = False

    return logger


__all__ = ["LOGGER_NAME", "setup_logger"]

"""
Centralized logging configuration for markov-embedding
统一日志配置模块
"""
from __future__ import annotations

import logging
import sys
from typing import Optional

PACKAGE_LOGGER = "markov_embedding"

# Package root logger, configured on first use
_root: Optional[logging.Logger] = None


def _configure_root() -> logging.Logger:
    global _root

    if _root is None:
        _root = logging.getLogger(PACKAGE_LOGGER)
        _root.setLevel(logging.INFO)
        _root.propagate = False

        # Avoid adding handlers multiple times
        if not _root.handlers:
            console_handler = logging.StreamHandler(sys.stdout)
            console_handler.setLevel(logging.INFO)

            # Format: [LEVEL] message
            formatter = logging.Formatter(
                "[%(levelname)s] %(message)s",
                datefmt="%H:%M:%S"
            )
            console_handler.setFormatter(formatter)

            _root.addHandler(console_handler)

    return _root


def get_logger(name: str = PACKAGE_LOGGER) -> logging.Logger:
    """
    Get a logger that writes through the package handler.

    Args:
        name: Module name (usually ``__name__``). Names outside the package
              are nested under it so that one handler serves everything.

    Returns:
        Configured logger instance
    """
    root = _configure_root()
    if name == PACKAGE_LOGGER:
        return root
    if not name.startswith(PACKAGE_LOGGER + "."):
        name = f"{PACKAGE_LOGGER}.{name}"
    return logging.getLogger(name)


def set_log_level(level: int | str) -> None:
    """
    Set the global log level.

    Args:
        level: Logging level (DEBUG, INFO, WARNING, ERROR, CRITICAL)
               or integer level
    """
    root = _configure_root()
    if isinstance(level, str):
        level = getattr(logging, level.upper(), logging.INFO)
    root.setLevel(level)
    for handler in root.handlers:
        handler.setLevel(level)

from __future__ import annotations

import logging
import sys

LOG_FORMAT = "%(asctime)s [%(levelname)s] %(name)s: %(message)s"


def configure_logging(level: str | int = "INFO") -> logging.Logger:
    """Attach a single stderr handler to the package logger and set its level.

    Safe to call repeatedly; later calls re-point the handler at the current
    ``sys.stderr`` and change the level.
    """
    logger = logging.getLogger("stackcnn")
    if not logger.handlers:
        handler = logging.StreamHandler(sys.stderr)
        handler.setFormatter(logging.Formatter(LOG_FORMAT))
        logger.addHandler(handler)
        logger.propagate = False
    else:
        for handler in logger.handlers:
            if isinstance(handler, logging.StreamHandler):
                handler.stream = sys.stderr
    if isinstance(level, str):
        level = level.upper()
    logger.setLevel(level)
    return logger


def progress_enabled(logger: logging.Logger) -> bool:
    """Progress bars only when INFO is on and stderr is a terminal."""
    return logger.isEnabledFor(logging.INFO) and sys.stderr.isatty()


__all__ = ["configure_logging", "progress_enabled", "LOG_FORMAT"]

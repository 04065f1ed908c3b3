"""Shared loguru logger. Everything goes to stderr; stdout is reserved for CLI output."""

import sys

from loguru import logger

from mvf.config.settings import LOG_LEVEL

FORMAT = "<green>{time:HH:mm:ss}</green> | <level>{level: <8}</level> | <cyan>{message}</cyan>"

_sink_id: int | None = None


def set_level(level: str) -> None:
    """Replace the stderr sink with one at `level` (TRACE..CRITICAL)."""
    global _sink_id
    if _sink_id is None:
        logger.remove()
    else:
        logger.remove(_sink_id)
    _sink_id = logger.add(sys.stderr, level=level.upper(), colorize=True, format=FORMAT)


set_level(LOG_LEVEL)

import logging
import sys

from app.core.config import config


def setup_logging(level: str | None = None) -> None:
    """Route all package logs to stderr; stdout is reserved for reports."""
    root = logging.getLogger("app")
    root.handlers.clear()
    handler = logging.StreamHandler(sys.stderr)
    handler.setFormatter(logging.Formatter(config.LOG_FORMAT))
    root.addHandler(handler)
    root.setLevel((level or config.LOG_LEVEL).upper())
    root.propagate = False

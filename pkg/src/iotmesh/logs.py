"""Structured log lines: ``<ISO8601> <level> <event> <k=v ...>``."""

from __future__ import annotations

import logging
import os
from datetime import datetime, timezone
from typing import Any


class _IsoFormatter(logging.Formatter):
    def formatTime(self, record: logging.LogRecord, datefmt: str | None = None) -> str:
        return datetime.fromtimestamp(record.created, tz=timezone.utc).isoformat(timespec="milliseconds")


def setup_logging(level: str | None = None) -> None:
    """Configure the root logger; ``IOTMESH_LOG`` overrides ``level``."""
    level = os.environ.get("IOTMESH_LOG") or level or "INFO"
    handler = logging.StreamHandler()
    handler.setFormatter(_IsoFormatter("%(asctime)s %(levelname)s %(message)s"))
    root = logging.getLogger()
    root.handlers[:] = [handler]
    root.setLevel(level.upper())


def _fmt(value: Any) -> str:
    text = str(value)
    if not text or any(c.isspace() for c in text) or "=" in text:
        return repr(text)
    return text


def log_event(logger: logging.Logger, level: int, event: str, **kv: Any) -> None:
    if logger.isEnabledFor(level):
        parts = [event] + [f"{k}={_fmt(v)}" for k, v in kv.items()]
        logger.log(level, " ".join(parts))

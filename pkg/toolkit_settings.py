#!/usr/bin/env python3
"""
Transmutation Toolkit - Settings
Environment-driven settings and logging setup for every entry point
"""

import os
import logging
from dataclasses import dataclass
from functools import lru_cache
from typing import Optional

from dotenv import load_dotenv

TOOLKIT_VERSION = "1.0.0"

LOG_FORMAT = '%(asctime)s - %(name)s - %(levelname)s - %(message)s'

_LOG_LEVELS = ("DEBUG", "INFO", "WARNING", "ERROR", "CRITICAL")


@dataclass(frozen=True)
class ToolkitSettings:
    """Process-wide settings resolved from the environment"""
    threads: int
    log_level: str
    log_file: Optional[str]
    output_dir: str


def _read_threads(raw: Optional[str]) -> int:
    if raw is None or raw.strip() == "":
        return max(1, os.cpu_count() or 1)
    try:
        value = int(raw)
    except ValueError:
        raise ValueError(f"TRANSMUTE_THREADS must be an integer, got {raw!r}")
    if value < 1:
        raise ValueError(f"TRANSMUTE_THREADS must be positive, got {value}")
    return value


@lru_cache(maxsize=1)
def get_settings() -> ToolkitSettings:
    """Load .env (if present) and read the TRANSMUTE_* variables"""
    load_dotenv()

    level = os.environ.get("TRANSMUTE_LOG_LEVEL", "INFO").upper()
    if level not in _LOG_LEVELS:
        raise ValueError(f"TRANSMUTE_LOG_LEVEL must be one of {_LOG_LEVELS}, got {level!r}")

    return ToolkitSettings(
        threads=_read_threads(os.environ.get("TRANSMUTE_THREADS")),
        log_level=level,
        log_file=os.environ.get("TRANSMUTE_LOG_FILE") or None,
        output_dir=os.environ.get("TRANSMUTE_OUTPUT_DIR", "results"),
    )


def configure_logging(level: Optional[str] = None) -> None:
    """Configure root logging once; entry points only"""
    settings = get_settings()
    handlers = [logging.StreamHandler()]
    if settings.log_file:
        handlers.append(logging.FileHandler(settings.log_file))

    logging.basicConfig(
        level=getattr(logging, (level or settings.log_level).upper()),
        format=LOG_FORMAT,
        handlers=handlers,
    )

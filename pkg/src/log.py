"""
Log - Logging setup for the command line entry point
"""

import logging
import os
from typing import Optional

from config.settings import ENV_PREFIX, LOG_FORMAT, LOG_LEVEL


def setup_logging(level: Optional[str] = None) -> None:
    """
    Configure root logging once for a CLI invocation

    Args:
        level: Level name; falls back to NCLD_LOG_LEVEL, then the settings default
    """
    name = level or os.environ.get(f"{ENV_PREFIX}LOG_LEVEL") or LOG_LEVEL
    logging.basicConfig(level=getattr(logging, name.upper(), logging.INFO), format=LOG_FORMAT, force=True)

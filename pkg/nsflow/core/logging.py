"""
Logging configuration
"""

import sys
from typing import Optional

from loguru import logger

from nsflow.core.config import settings

TEXT_FORMAT = (
    "<green>{time:YYYY-MM-DD HH:mm:ss}</green> | <level>{level: <8}</level> | "
    "<cyan>{name}</cyan>:<cyan>{function}</cyan>:<cyan>{line}</cyan> - <level>{message}</level>"
)


def setup_logging(level: Optional[str] = None, fmt: Optional[str] = None) -> None:
    """Setup logging configuration"""
    level = (level or settings.log_level).upper()
    fmt = fmt or settings.log_format

    # Remove default handler
    logger.remove()

    if fmt == "json":
        logger.add(sys.stderr, level=level, serialize=True)
    else:
        logger.add(sys.stderr, level=level, format=TEXT_FORMAT, colorize=True)


# Create logger instance
log = logger

import sys
from pathlib import Path
from typing import Optional, Union

from loguru import logger

CONSOLE_FORMAT = (
    "<green>{time:HH:mm:ss}</green> | "
    "<level>{level: <8}</level> | "
    "<cyan>{name}</cyan>:<cyan>{function}</cyan> - "
    "<level>{message}</level>"
)

FILE_FORMAT = "{time:YYYY-MM-DD HH:mm:ss} | {level: <8} | {name}:{function}:{line} - {message}"


def setup_logging(
    level: str = "INFO",
    log_file: Optional[Union[str, Path]] = None,
    file_level: str = "DEBUG",
) -> None:
    """
    Configure loguru for a command line run.

    Reports may be printed to stdout, so the console sink writes to stderr.

    Args:
        level: Console level, case-insensitive ("info", "DEBUG", ...)
        log_file: Optional path of a rotating log file for long certification runs
        file_level: Level of the file sink
    """
    logger.remove()
    logger.add(sys.stderr, colorize=True, format=CONSOLE_FORMAT, level=level.upper())

    if log_file is not None:
        logger.add(
            log_file,
            format=FILE_FORMAT,
            level=file_level.upper(),
            rotation="50 MB",
            retention="10 days",
            compression="zip",
        )

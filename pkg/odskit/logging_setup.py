"""Logging configuration for odskit."""

import os
import logging
from datetime import datetime

from odskit import __version__

# Per-input attack lines are DEBUG; the file keeps them, the console does not.
FILE_LEVEL = logging.DEBUG
LOG_FORMAT = '%(asctime)s - %(levelname)s - %(processName)s - %(message)s'


def setup_logging(level: str = "INFO", path: str = "./odskit-out/logs", command: str = "run"):
    """Configure and return the odskit logger.

    Args:
        level: Console log level (DEBUG, INFO, WARNING, ERROR)
        path: Directory path for log files
        command: CLI subcommand, used in the log file name
    """
    os.makedirs(path, exist_ok=True)
    log_file = os.path.join(
        path,
        f"odskit-{command}({__version__})_{datetime.now().strftime('%Y%m%d_%H%M%S')}.log"
    )

    logger = logging.getLogger("odskit")
    console_level = getattr(logging, level.upper(), logging.INFO)
    logger.setLevel(min(console_level, FILE_LEVEL))

    # Worker processes fork with these handlers; a second setup replaces them.
    for handler in list(logger.handlers):
        logger.removeHandler(handler)
        handler.close()

    formatter = logging.Formatter(LOG_FORMAT)

    file_handler = logging.FileHandler(log_file)
    file_handler.setLevel(FILE_LEVEL)
    file_handler.setFormatter(formatter)

    stream_handler = logging.StreamHandler()
    stream_handler.setLevel(console_level)
    stream_handler.setFormatter(formatter)

    logger.addHandler(file_handler)
    logger.addHandler(stream_handler)

    logger.debug(f"Log file created: {log_file}")

    return logger

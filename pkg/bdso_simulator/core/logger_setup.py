"""
Module for setting up and configuring the logging system.
"""

import logging
import logging.config
from pathlib import Path

LOGGING_CONFIG_FILE_PATH = Path(__file__).parent.parent / "logging.ini"


def setup_logger() -> None:
    """
    Set up the logger using the `logging.ini` config file next to the package, falling back to basic warning level
    logging when the file has not been created from `logging.example.ini`.
    """
    if LOGGING_CONFIG_FILE_PATH.exists():
        logging.config.fileConfig(LOGGING_CONFIG_FILE_PATH, disable_existing_loggers=False)
    else:
        logging.basicConfig(level=logging.WARNING)

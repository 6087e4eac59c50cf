"""Logging configuration for crncert."""
import logging
import logging.handlers
import sys
from pathlib import Path
from typing import Any, Dict, Optional

import psutil

from .. import const


def setup_logging(level: int = logging.INFO, log_file: Optional[Path] = None) -> None:
    """Set up logging configuration.

    Args:
        level: Logging level for every handler
        log_file: Optional path of a rotating log file
    """
    console_formatter = logging.Formatter('%(levelname)s: %(message)s')
    file_formatter = logging.Formatter(
        '%(asctime)s - %(name)s - %(levelname)s - %(message)s'
    )

    root_logger = logging.getLogger()
    root_logger.setLevel(level)
    for handler in list(root_logger.handlers):
        root_logger.removeHandler(handler)
        handler.close()

    # Reports go to stdout, so the console handler writes to stderr
    console_handler = logging.StreamHandler(sys.stderr)
    console_handler.setFormatter(console_formatter)
    console_handler.setLevel(level)
    root_logger.addHandler(console_handler)

    if log_file is not None:
        log_file.parent.mkdir(parents=True, exist_ok=True)
        file_handler = logging.handlers.RotatingFileHandler(
            log_file,
            maxBytes=const.LOG_MAX_BYTES,
            backupCount=const.LOG_BACKUP_COUNT,
            encoding='utf-8'
        )
        file_handler.setFormatter(file_formatter)
        file_handler.setLevel(level)
        root_logger.addHandler(file_handler)

    # Set levels for some chatty libraries
    logging.getLogger("lark").setLevel(logging.WARNING)
    logging.getLogger("matplotlib").setLevel(logging.WARNING)

    logger = logging.getLogger(__name__)
    if log_file is not None:
        logger.debug("Logging to %s", log_file)
    logger.debug("Log level set to %s", logging.getLevelName(level))


def log_system_info(logger: logging.Logger) -> None:
    """Log CPU and memory figures relevant to parallel validation runs."""
    try:
        memory = psutil.virtual_memory()
        logger.debug("System CPUs: %s physical, %s logical",
                     psutil.cpu_count(logical=False), psutil.cpu_count())
        logger.debug("Memory available: %.1f MiB of %.1f MiB",
                     memory.available / 2**20, memory.total / 2**20)
    except Exception as e:
        logger.error("Error logging system info: %s", str(e))


def log_error_with_context(logger: logging.Logger, error: Exception,
                           context: Optional[Dict[str, Any]] = None) -> None:
    """Log an error together with the pipeline context it occurred in."""
    logger.error("Error: %s", str(error))
    for key, value in (context or {}).items():
        logger.error("  %s: %s", key, value)

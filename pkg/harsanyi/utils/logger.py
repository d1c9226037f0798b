# harsanyi/utils/logger.py
"""
Centralized logging configuration for the harsanyi toolkit
Command output goes to stdout; everything logged here goes to stderr or the log file
"""

import logging
import sys
import os
from logging.handlers import RotatingFileHandler

PACKAGE_LOGGER = 'harsanyi'


def setup_logger(runtime):
    """
    Configure package logging with console and optional file handlers

    Features:
    - Environment-based log levels (DEBUG in dev, INFO in prod, WARNING in tests)
    - Structured log format with timestamps and module context
    - File rotation (10MB files, keep 10 backups)
    - Console output on stderr so result CSVs on stdout stay clean

    Args:
        runtime: Runtime instance (config class + debug flag)
    """
    cfg = runtime.config

    if cfg.LOG_LEVEL:
        log_level = logging.getLevelName(cfg.LOG_LEVEL.upper())
        if not isinstance(log_level, int):
            log_level = logging.INFO
    else:
        log_level = logging.DEBUG if cfg.DEBUG else logging.INFO

    formatter = logging.Formatter(
        '[%(asctime)s] %(levelname)s in %(module)s: %(message)s',
        datefmt='%Y-%m-%d %H:%M:%S'
    )

    logger = logging.getLogger(PACKAGE_LOGGER)

    console_handler = logging.StreamHandler(sys.stderr)
    console_handler.setFormatter(formatter)
    console_handler.setLevel(log_level)

    # Clear any existing handlers to avoid duplicates
    for handler in list(logger.handlers):
        logger.removeHandler(handler)
        handler.close()

    logger.addHandler(console_handler)
    logger.propagate = False

    if cfg.ENABLE_FILE_LOGGING:
        os.makedirs(cfg.LOG_DIR, exist_ok=True)
        log_file = os.path.join(cfg.LOG_DIR, cfg.LOG_FILE_NAME)

        file_handler = RotatingFileHandler(
            log_file,
            maxBytes=cfg.LOG_MAX_BYTES,
            backupCount=cfg.LOG_BACKUP_COUNT
        )
        file_handler.setFormatter(formatter)
        file_handler.setLevel(logging.INFO)
        logger.addHandler(file_handler)

        logger.info(f"File logging enabled: {log_file}")

    logger.setLevel(log_level)

    logger.debug("=" * 50)
    logger.debug("harsanyi toolkit starting")
    logger.debug(f"Environment: {runtime.env_name}")
    logger.debug(f"Log Level: {logging.getLevelName(log_level)}")
    logger.debug("=" * 50)

    return logger

"""
Command Logging Middleware

Centralized logging for every CLI command: what ran with which parameters,
how it ended and how long it took. Log lines go to the package logger, never
to stdout, so command output stays byte-reproducible.
"""

import functools
import logging
from time import time

import click

from harsanyi.config import get_config

logger = logging.getLogger(__name__)


def log_command_start(name, params):
    """
    Log a command before it runs.

    Records the command name and every resolved parameter that is set.
    Returns the start time for log_command_end.
    """
    shown = ' '.join(f"{key}={value}" for key, value in sorted(params.items()) if value not in (None, (), ''))
    logger.info(f"{name} {shown}".rstrip())
    return time()


def log_command_end(name, started, status='ok'):
    """
    Log a finished command with its status and elapsed seconds.

    Commands above the configured threshold get a SLOW marker.
    """
    elapsed = time() - started
    log_msg = f"{name} - Status: {status} - Time: {elapsed:.3f}s"
    if elapsed > get_config().SLOW_COMMAND_SECONDS:
        logger.warning(f"SLOW COMMAND: {log_msg}")
    elif status == 'ok':
        logger.info(log_msg)
    else:
        logger.error(log_msg)
    return elapsed


def logged_command(fn):
    """Wrap a click callback with start/end logging."""

    @functools.wraps(fn)
    def wrapper(*args, **kwargs):
        name = click.get_current_context().info_name
        started = log_command_start(name, kwargs)
        try:
            result = fn(*args, **kwargs)
        except Exception as e:
            log_command_end(name, started, status=type(e).__name__)
            raise
        log_command_end(name, started)
        return result

    return wrapper

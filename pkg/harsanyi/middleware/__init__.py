"""
Middleware package for the harsanyi CLI.

This package contains components wrapped around every command.
"""

from .command_logger import log_command_end, log_command_start, logged_command

__all__ = ['log_command_start', 'log_command_end', 'logged_command']

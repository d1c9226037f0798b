# harsanyi/utils/__init__.py
"""
Utility modules for the harsanyi toolkit
"""

from .logger import setup_logger
from .rng import substream

__all__ = ['setup_logger', 'substream']

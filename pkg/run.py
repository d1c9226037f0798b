"""
Command-line Entry Point
Usage: python run.py <command> [options]   (see `python run.py --help`)
"""

import sys

from harsanyi.cli import main

if __name__ == '__main__':
    sys.exit(main())

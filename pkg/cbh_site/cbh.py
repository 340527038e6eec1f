#!/usr/bin/env python
"""Steady-state cooling-by-heating calculator: ``cbh.py <subcommand> [options]``."""
import sys

from core.cli import cli_main


if __name__ == '__main__':
    sys.exit(cli_main())

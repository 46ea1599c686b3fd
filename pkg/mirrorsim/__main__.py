#!/usr/bin/env python3
"""Run the command-line interface with python -m mirrorsim."""
import sys

from .cli import main

sys.exit(main())

#!/usr/bin/env python3
"""Consolidated configuration module."""
from __future__ import annotations

import os
import pathlib
import sys
from typing import Callable

from .logger import log


class ConfigClass:
    """Configuration class holding user specifiable variables.

    An instance of this class will be set as the same name as this module. This will effectively
    make this module a singleton data class.
    """
    def __init__(self):
        """Initialize the ConfigClass object."""
        self.trace = False        # Do not record trace lines by default since they grow quickly
        self.workers = None       # Read workers from environment variables by default
        self.verbose = 'INFO'     # Display run summaries by default

    # ### Class properties ###

    @property
    def trace(self):
        """Default trace flag for new simulators."""
        return self._trace

    @trace.setter
    def trace(self, value):
        self._trace = bool(value)

    @property
    def workers(self):
        """Number of worker processes used in scenario sweeps."""
        if self._workers is None:
            try:
                return int(os.environ['MIRRORSIM_WORKERS'])
            except (KeyError, ValueError):
                return None
        return int(self._workers)

    @workers.setter
    def workers(self, value):
        if value is not None and int(value) < 1:
            msg = f'The number of workers has to be positive, got {value}.'
            raise ValueError(msg)
        self._workers = value

    @property
    def verbose(self):
        """Logger verbosity level."""
        return log.verbose

    @verbose.setter
    def verbose(self, value):
        # Logic in setter to run it on initialization
        log.verbose = value

    # ### Class methods ###

    def info(self):
        """Print configuration and performance information."""
        print('--- Configuration infos ---')
        print(f'Global verbosity : {self.verbose}')
        print(f'Trace recording  : {self.trace}')

        print('\n--- Performance infos ---')
        if self.workers is None:
            print('Sweep workers : 1\n'
                  'INFO: No MIRRORSIM_WORKERS environment variable was found.\nSweeps run '
                  'sequentially. To run scenarios in parallel processes, add\n"export '
                  'MIRRORSIM_WORKERS=n" to your ".bashrc" or set "mirrorsim.config.workers=n".')
        else:
            print(f'Sweep workers : {self.workers}')


# Add type hints for all properties and methods of the ConfigClass to the module
# This allows type checkers to see that the module has said attribute
trace: bool
workers: int | None
verbose: int | str
info: Callable[[], None]

# Do not initialize the class when Sphinx is running
# Since we set the class instance to the module name Sphinx will only document the main docstring of
# the class without the properties
if 'sphinx-build' not in pathlib.Path(sys.argv[0]).name:
    sys.modules[__name__] = ConfigClass()  # type: ignore[assignment]

#!/usr/bin/env python3
"""Logger initialization and configuration.

Loggers of simulation objects are bound to the clock of their simulator. Their records carry the
simulation time, which the formatter puts in front of every message. Trace records are formatted
by :func:`format_trace` and already start with their time stamp.
"""
import logging
import numbers
import sys
import weakref

from .units import ns2ms


class CustomLogger(logging.Logger):
    """Custom logger for the usage outside of classes.

    A basic logger with an added verbose property and an optional simulation clock.

    Args:
        name (str): Logger name.
    """
    def __init__(self, name):
        """Initialize the CustomLogger object."""
        super().__init__(name)
        self._verbose = 'WARNING'
        self._clock = None

    @property
    def verbose(self):
        """Verbosity level."""
        return self._verbose

    @verbose.setter
    def verbose(self, level):
        self._verbose = get_level(level)
        self.setLevel(self._verbose)

    @property
    def sim_time(self):
        """Current time of the bound simulator in nanoseconds, None if unbound."""
        sim = self._clock() if self._clock is not None else None
        return getattr(sim, 'now', None)

    def bind_clock(self, sim):
        """Stamp all further records with the time of a simulator.

        Only a weak reference is kept, loggers live as long as the process.

        Args:
            sim: Object with a now attribute in nanoseconds, usually a Simulator.
        """
        self._clock = weakref.ref(sim)

    def makeRecord(self, *args, **kwargs):
        """Create a log record that carries the simulation time."""
        record = super().makeRecord(*args, **kwargs)
        record.sim_time = self.sim_time
        return record

    def trace(self, time, category, *fields):
        """Log a trace record at the debug level.

        Args:
            time (int): Simulation time in nanoseconds.
            category (str): Record category.
            fields: Record fields.

        Returns:
            str: Trace line.
        """
        line = format_trace(time, category, *fields)
        self.debug(line, extra={'trace': True})
        return line


class CustomFormatter(logging.Formatter):
    """Custom logger formatter."""
    def format(self, record):
        """Use different formatting for different logging levels and record kinds.

        Args:
            record: LogRecord object.
        """
        fmt = '%(msg)s'
        sim_time = getattr(record, 'sim_time', None)
        if sim_time is not None and not getattr(record, 'trace', False):
            fmt = f'[{ns2ms(sim_time):.6f} ms] {fmt}'
        if record.levelno >= logging.WARNING:
            # Print the level name for errors and warnings
            fmt = f'%(levelname)s: {fmt}'
        self._style._fmt = fmt
        return super().format(record)


# The following code is not guarded by a function because it has to be run once the logger is called
# to set up the basic logger configuration

# Create a base logger that can be used outside of classes
logging.setLoggerClass(CustomLogger)
#: Global logging object.
log = logging.getLogger('mirrorsim')

# Basic logger setup
__formatter = CustomFormatter()
__handler = logging.StreamHandler(sys.stdout)
__handler.setFormatter(__formatter)
logging.root.addHandler(__handler)


def create_logger(obj, sim=None):
    """Create a logger unique to an object.

    Args:
        obj: Instance of a class.

    Keyword Args:
        sim: Simulator whose clock stamps the records, records stay unstamped for None.

    Returns:
        CustomLogger: Logger named mirrorsim.<type>.<id>.
    """
    # Without the ID the verbosity of one simulation would affect other simulations
    local_log = logging.getLogger(f'mirrorsim.{type(obj).__name__}.{id(obj)}')
    local_log.verbose = log.verbose
    if sim is not None:
        local_log.bind_clock(sim)
    return local_log


def get_level(verbose):
    """Validate logging levels.

    Args:
        verbose (int | str | None): Level of output.

    Returns:
        str: Logging level name.
    """
    log_levels = {
        0: 'CRITICAL',
        1: 'ERROR',
        2: 'WARNING',
        3: 'INFO',
        4: 'DEBUG'
    }
    # Use the global logging level for None
    if verbose is None:
        level = log.verbose
    # Fall back to DEBUG if the level is not available
    elif isinstance(verbose, numbers.Number):
        level = log_levels.get(verbose, 'DEBUG')
    else:
        level = verbose
    level = level.upper()
    if level not in log_levels.values():
        msg = f'{level} is no recognized logging level.'
        raise ValueError(msg)
    return level


def format_trace(time, category, *fields):
    """Format one trace record.

    Fields keep their given order so that traces of identical runs compare equal line by line.

    Args:
        time (int): Simulation time in nanoseconds.
        category (str): Record category, e.g., 'link', 'switch', or 'tcp'.
        fields: Values written after the category, separated by single spaces.

    Returns:
        str: Trace line without trailing newline.
    """
    return ' '.join([f'{time:d}', category, *(str(f) for f in fields)])

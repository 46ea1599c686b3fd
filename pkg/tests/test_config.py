#!/usr/bin/env python3
"""Test configuration class."""
import pytest

import mirrorsim
from mirrorsim import config
from mirrorsim.engine import Simulator


def test_singleton():
    """Check that config is truly a singleton."""
    assert id(config) == id(mirrorsim.config)


@pytest.mark.parametrize('level', ['debug', 0, 9])
def test_logger(level):
    """Check that the logger gets properly updated."""
    config.verbose = level
    assert config.verbose == mirrorsim.log.verbose
    config.verbose = 'INFO'


def test_trace():
    """Check that new simulators use the trace default."""
    config.trace = True
    assert Simulator().tracing
    assert not Simulator(trace=False).tracing
    config.trace = False
    assert not Simulator().tracing


def test_workers(monkeypatch):
    """Check the workers setting."""
    monkeypatch.delenv('MIRRORSIM_WORKERS', raising=False)
    assert config.workers is None

    monkeypatch.setenv('MIRRORSIM_WORKERS', '3')
    assert config.workers == 3
    monkeypatch.setenv('MIRRORSIM_WORKERS', 'many')
    assert config.workers is None

    config.workers = 2
    assert config.workers == 2
    assert isinstance(config.workers, int)
    with pytest.raises(ValueError):
        config.workers = 0
    config.workers = None


def test_info():
    """Check that the config info function properly executes."""
    config.info()


if __name__ == '__main__':
    import inspect
    import pathlib
    file_path = pathlib.Path(inspect.stack()[0][1])
    pytest.main(file_path)

#!/usr/bin/env python3
"""Test the command-line interface."""
import pytest

from mirrorsim import cli
from mirrorsim.engine import SimulationError
from mirrorsim.io import read_csv

small = ['--set', 'replication.block_size=65536']


def test_analytic(capsys):
    """Check the printed saving ratios."""
    assert cli.main(['analytic', '--k-min', '2', '--k-max', '4']) == cli.EXIT_OK
    lines = capsys.readouterr().out.splitlines()
    assert len(lines) == 1 + 3
    assert lines[0].split()[0] == 'k'
    assert [line.split()[0] for line in lines[1:]] == ['2', '3', '4']


def test_simulate(tmp_path, capsys):
    """Check one scenario in both modes."""
    output = str(tmp_path / 'results.csv')
    assert cli.main(['simulate', *small, '--seed', '3', '-o', output]) == cli.EXIT_OK
    assert 'Seed: 3' in capsys.readouterr().out
    with open(output, encoding='utf-8') as fh:
        assert len(fh.read().splitlines()) == 3
    rows = read_csv(output)
    assert [row['mode'] for row in rows] == ['chain', 'mirrored']
    assert rows[0]['k'] == rows[1]['k'] == 3


def test_simulate_file(tmp_path):
    """Check scenario files together with overrides."""
    scenario = tmp_path / 'single.yaml'
    scenario.write_text('name: single\nreplication:\n  mode: mirrored\n  k: 2\n', encoding='utf-8')
    output = str(tmp_path / 'results.csv')
    assert cli.main(['simulate', str(scenario), *small, '-o', output]) == cli.EXIT_OK
    rows = read_csv(output)
    assert [(row['scenario'], row['mode'], row['k']) for row in rows] == [('single', 'mirrored', 2)]


def test_plan(tmp_path, capsys):
    """Check the printed mirroring entries."""
    output = str(tmp_path / 'results.csv')
    assert cli.main(['simulate', *small, '--plan', '-o', output]) == cli.EXIT_OK
    out = capsys.readouterr().out
    assert '--- Pipeline 0 ---' in out
    assert 'output(' in out


@pytest.mark.parametrize('argv', [['simulate', '--set', 'replication.colour=red'],
                                  ['simulate', '--set', 'replication.k'],
                                  ['simulate', 'missing.yaml'],
                                  ['sweep', '--k-min', '4', '--k-max', '3'],
                                  ['analytic', '--k-min', '0'],
                                  ['simulate', '--set', 'topology.hosts_per_rack=255']])
def test_config_errors(argv):
    """Check the exit code of configuration errors."""
    assert cli.main(argv) == cli.EXIT_CONFIG


def test_simulation_error(tmp_path, monkeypatch):
    """Check the exit code of failed simulations."""
    def fail(cfg):
        raise SimulationError('replicas differ')

    monkeypatch.setattr(cli, 'run_scenario', fail)
    output = str(tmp_path / 'results.csv')
    assert cli.main(['simulate', '-o', output]) == cli.EXIT_SIMULATION


@pytest.mark.slow
def test_sweep(tmp_path):
    """Check a replication factor sweep."""
    output = str(tmp_path / 'sweep.csv')
    argv = ['sweep', *small, '--k-min', '2', '--k-max', '3', '--workers', '1', '-o', output]
    assert cli.main(argv) == cli.EXIT_OK
    rows = read_csv(output)
    assert len(rows) == 4
    assert [(row['k'], row['mode']) for row in rows] == [(2, 'chain'), (2, 'mirrored'),
                                                         (3, 'chain'), (3, 'mirrored')]


if __name__ == '__main__':
    import inspect
    import pathlib
    file_path = pathlib.Path(inspect.stack()[0][1])
    pytest.main(file_path)

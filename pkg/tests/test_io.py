#!/usr/bin/env python3
"""Test input and output functionalities."""
import math

import pytest

from mirrorsim.analysis import RunMetrics
from mirrorsim.io import read, read_csv, read_yaml, write, write_csv, write_json, write_yaml
from mirrorsim.scenario import ConfigError, ScenarioConfig

cfg = ScenarioConfig(name='io').replace(replication__k=4, topology__loss=0.01,
                                        engine__ack_delay_overrides={1: 500})
metrics = RunMetrics('io', 'mirrored', 3, 1000, 2000, 7.0, 400, 2, 5, 4 / 11,
                     link_payload={(2, 5): 100}, link_total={(2, 5): 140},
                     placements=[[5, 6, 8]], max_outstanding=4)
single = RunMetrics('io', 'chain', 1, 10, 20, 1.0, 0, 0, 0, math.nan)


@pytest.mark.parametrize('ending', ['yaml', 'yml', 'json'])
def test_scenario(tmp_path, ending):
    """Test scenario output and input."""
    filename = str(tmp_path / f'scenario.{ending}')
    write(cfg, filename)
    assert read(filename) == cfg


def test_yaml_ending(tmp_path):
    """Test that missing endings are appended."""
    filename = str(tmp_path / 'scenario')
    write_yaml(cfg, filename)
    assert read_yaml(filename) == cfg


def test_metrics_json(tmp_path):
    """Test metrics output and input including a NaN ratio."""
    filename = str(tmp_path / 'metrics.json')
    write_json({'runs': [metrics, single]}, filename)
    runs = read(filename)['runs']
    assert runs[0] == metrics
    assert runs[0].link_payload == {(2, 5): 100}
    assert math.isnan(runs[1].saving_ratio)
    assert runs[1].k == 1


def test_csv(tmp_path):
    """Test metrics rows output and input."""
    filename = str(tmp_path / 'results.csv')
    write_csv([metrics, single], filename)
    rows = read_csv(filename)
    assert [row['mode'] for row in rows] == ['mirrored', 'chain']
    assert rows[0]['k'] == 3
    assert rows[0]['retx_count'] == 2
    assert rows[0]['payload_link_traversals'] == 7.0
    assert rows[0]['saving_ratio'] == 0.3636
    assert rows[1]['saving_ratio'] is None


def test_csv_header(tmp_path):
    """Test that foreign CSV files are rejected."""
    filename = tmp_path / 'foreign.csv'
    filename.write_text('a,b\n1,2\n', encoding='utf-8')
    with pytest.raises(ValueError):
        read(str(filename))


def test_malformed_yaml(tmp_path):
    """Test that broken scenario files raise configuration errors."""
    filename = tmp_path / 'broken.yaml'
    filename.write_text('topology: [1, 2\n', encoding='utf-8')
    with pytest.raises(ConfigError):
        read(str(filename))
    filename.write_text('- 1\n- 2\n', encoding='utf-8')
    with pytest.raises(ConfigError):
        read(str(filename))


def test_unknown_ending(tmp_path):
    """Test the file ending dispatch."""
    with pytest.raises(NotImplementedError):
        read(str(tmp_path / 'scenario.toml'))
    with pytest.raises(NotImplementedError):
        write(cfg, str(tmp_path / 'scenario.toml'))


if __name__ == '__main__':
    import inspect
    import pathlib
    file_path = pathlib.Path(inspect.stack()[0][1])
    pytest.main(file_path)

#!/usr/bin/env python3
"""YAML file handling."""
import yaml


def read_yaml(filename):
    """Load a scenario from a YAML file.

    Args:
        filename (str): YAML input file path/name.

    Returns:
        ScenarioConfig: Validated scenario.
    """
    from ..scenario import ConfigError, from_dict

    if not filename.endswith(('.yml', '.yaml')):
        filename += '.yaml'

    with open(filename, encoding='utf-8') as fh:
        try:
            data = yaml.safe_load(fh)
        except yaml.YAMLError as err:
            msg = f'Malformed scenario file "{filename}": {err}'
            raise ConfigError(msg) from err
    if data is not None and not isinstance(data, dict):
        msg = f'Scenario file "{filename}" has to contain a mapping of sections.'
        raise ConfigError(msg)
    return from_dict(data)


def write_yaml(cfg, filename):
    """Save a scenario in a YAML file.

    Args:
        cfg (ScenarioConfig): Scenario.
        filename (str): YAML output file path/name.
    """
    if not filename.endswith(('.yml', '.yaml')):
        filename += '.yaml'

    with open(filename, 'w', encoding='utf-8') as fp:
        yaml.safe_dump(cfg.to_dict(), fp, sort_keys=False)

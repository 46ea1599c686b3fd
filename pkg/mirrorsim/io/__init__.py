#!/usr/bin/env python3
"""File input and output functionalities."""
from .csv import read_csv, write_csv
from .json import read_json, write_json
from .yaml import read_yaml, write_yaml

__all__ = ['read', 'read_csv', 'read_json', 'read_yaml', 'write', 'write_csv', 'write_json',
           'write_yaml']


def read(*args, **kwargs):
    """Unified file reader function."""
    if args[0].endswith('.json'):
        return read_json(*args, **kwargs)
    if args[0].endswith(('.yml', '.yaml')):
        return read_yaml(*args, **kwargs)
    if args[0].endswith('.csv'):
        return read_csv(*args, **kwargs)
    msg = f'File ending of "{args[0]}" not recognized.'
    raise NotImplementedError(msg)


def write(*args, **kwargs):
    """Unified file writer function."""
    if args[1].endswith('.json'):
        return write_json(*args, **kwargs)
    if args[1].endswith(('.yml', '.yaml')):
        return write_yaml(*args, **kwargs)
    if args[1].endswith('.csv'):
        return write_csv(*args, **kwargs)
    msg = f'File ending of "{args[1]}" not recognized.'
    raise NotImplementedError(msg)

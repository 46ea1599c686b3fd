#!/usr/bin/env python3
"""mirrorsim - Simulator of SDN-assisted mirrored replication for cluster file systems.

Minimal usage example to compare chain and mirrored replication of one block::

   from mirrorsim import ScenarioConfig, run_scenario
   results = run_scenario(ScenarioConfig())
   print(results['chain'].data_time, results['mirrored'].data_time)
"""
from . import config
from .analysis import (
    enumerate_average_savings,
    l_total,
    PlacementCase,
    run_scenario,
    RunMetrics,
    saving_ratio,
    sweep,
)
from .controller import compute_tree, Controller, PipelineSpec, program_mirroring
from .engine import check_early_ack_condition, SimulationError, Simulator
from .io import read, read_csv, read_json, read_yaml, write, write_csv, write_json, write_yaml
from .logger import log
from .replication import Cluster
from .scenario import ConfigError, ScenarioConfig
from .topology import build_three_layer, example_topology, shortest_path
from .version import __version__, info

__all__ = ['Cluster', 'ConfigError', 'Controller', 'PipelineSpec', 'PlacementCase', 'RunMetrics',
           'ScenarioConfig', 'SimulationError', 'Simulator', '__version__', 'build_three_layer',
           'check_early_ack_condition', 'compute_tree', 'config', 'enumerate_average_savings',
           'example_topology', 'info', 'l_total', 'log', 'program_mirroring', 'read', 'read_csv',
           'read_json', 'read_yaml', 'run_scenario', 'saving_ratio', 'shortest_path', 'sweep',
           'write', 'write_csv', 'write_json', 'write_yaml']

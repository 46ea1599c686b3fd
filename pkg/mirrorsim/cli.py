#!/usr/bin/env python3
"""Command-line interface.

Subcommands:

* simulate: run one scenario in its configured modes and write a CSV row per mode,
* analytic: print the average saving ratios of the traffic model,
* sweep: run a scenario for a range of replication factors in both modes.

Exit codes are 0 on success, 1 for configuration errors, and 2 for failed simulations.
"""
from __future__ import annotations

import argparse
import pathlib
import sys

from . import config
from .analysis import run_scenario, savings_table, sweep
from .controller import format_plan
from .engine import SimulationError
from .io import read, write_csv
from .logger import log
from .replication import Cluster, MIRRORED
from .scenario import apply_overrides, ConfigError, ScenarioConfig
from .units import ns2ms
from .version import __version__

#: Exit codes.
EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_SIMULATION = 2


def build_parser():
    """Create the argument parser."""
    parser = argparse.ArgumentParser(
        prog='mirrorsim',
        description='Simulate chain and SDN-mirrored replication of cluster file system blocks.')
    parser.add_argument('--version', action='version', version=f'%(prog)s {__version__}')
    parser.add_argument('-v', '--verbose', default=None,
                        help='logging level as name or number 0-4 (default: INFO)')
    sub = parser.add_subparsers(dest='command', required=True)

    def add_scenario_args(p):
        p.add_argument('scenario', nargs='?', default=None,
                       help='scenario file (.yaml, .yml, or .json), defaults apply if omitted')
        p.add_argument('--set', dest='overrides', action='append', default=[],
                       metavar='SECTION.KEY=VALUE', help='override a scenario value')
        p.add_argument('--seed', type=int, default=None, help='global seed (engine.seed)')
        p.add_argument('-o', '--output', default='results.csv', help='CSV output file')
        p.add_argument('--trace', default=None, help='write trace lines to this file')

    p = sub.add_parser('simulate', help='run one scenario')
    add_scenario_args(p)
    p.add_argument('--plan', action='store_true', help='print the mirroring entries of each block')

    p = sub.add_parser('sweep', help='run k = k_min..k_max in both modes')
    add_scenario_args(p)
    p.add_argument('--k-min', type=int, default=2)
    p.add_argument('--k-max', type=int, default=5)
    p.add_argument('--workers', type=int, default=None,
                   help='worker processes (default: mirrorsim.config.workers)')

    p = sub.add_parser('analytic', help='average saving ratios of the traffic model')
    p.add_argument('--k-min', type=int, default=2)
    p.add_argument('--k-max', type=int, default=5)
    p.add_argument('--independent', action='store_true',
                   help='enumerate ascending and descending link counts independently')
    return parser


def load_scenario(args):
    """Read the scenario file and apply the command-line overrides."""
    cfg = read(args.scenario) if args.scenario else ScenarioConfig()
    overrides = list(args.overrides)
    if args.seed is not None:
        overrides.append(f'engine.seed={args.seed}')
    if args.trace is not None:
        overrides.append('engine.trace=true')
    return apply_overrides(cfg, overrides) if overrides else cfg.validate()


def _write_trace(filename, metrics):
    """Write the trace lines of all runs."""
    lines = []
    for m in metrics:
        lines.append(f'# {m.scenario} {m.mode}')
        lines.extend(m.trace)
    pathlib.Path(filename).write_text('\n'.join(lines) + '\n', encoding='utf-8')


def cmd_simulate(args):
    """Run one scenario."""
    cfg = load_scenario(args)
    print(f'Seed: {cfg.engine.seed}')
    results = run_scenario(cfg)
    metrics = list(results.values())
    for m in metrics:
        log.info(f'{m.mode:<9} k={m.k}: data {ns2ms(m.data_time):.3f} ms, '
                 f'total {ns2ms(m.total_time):.3f} ms, traversals {m.payload_link_traversals:.3f}')
    if args.plan and 'mirrored' in results:
        _print_plans(cfg)
    write_csv(metrics, args.output)
    if args.trace:
        _write_trace(args.trace, metrics)
    return EXIT_OK


def _print_plans(cfg):
    """Print the mirroring entries the controller installs for each block."""
    cluster = Cluster(cfg, MIRRORED, verbose='WARNING')
    for pipeline_id, installs in cluster.plan():
        print(f'--- Pipeline {pipeline_id} ---')
        print(format_plan(cluster.topology, installs))


def cmd_sweep(args):
    """Run a replication factor sweep."""
    cfg = load_scenario(args)
    if not 1 <= args.k_min <= args.k_max:
        msg = f'Invalid replication factor range {args.k_min}..{args.k_max}.'
        raise ConfigError(msg)
    print(f'Seed: {cfg.engine.seed}')
    metrics = sweep(cfg, range(args.k_min, args.k_max + 1), workers=args.workers)
    for m in metrics:
        log.info(f'{m.scenario:<16} {m.mode:<9} data {ns2ms(m.data_time):.3f} ms')
    write_csv(metrics, args.output)
    if args.trace:
        _write_trace(args.trace, metrics)
    return EXIT_OK


def cmd_analytic(args):
    """Print average saving ratios."""
    if not 1 <= args.k_min <= args.k_max:
        msg = f'Invalid replication factor range {args.k_min}..{args.k_max}.'
        raise ConfigError(msg)
    rows = savings_table(range(args.k_min, args.k_max + 1), symmetric=not args.independent)
    columns = list(rows[0])
    print(' '.join(f'{c:>10}' for c in columns))
    for row in rows:
        print(' '.join(f'{row[c]:>10}' if c == 'k' else f'{row[c]:>10.4f}' for c in columns))
    return EXIT_OK


def main(argv=None):
    """Run the command-line interface.

    Keyword Args:
        argv (list[str] | None): Arguments, defaults to sys.argv.

    Returns:
        int: Exit code.
    """
    args = build_parser().parse_args(argv)
    if args.verbose is not None:
        try:
            config.verbose = int(args.verbose) if args.verbose.isdigit() else args.verbose
        except ValueError as err:
            log.error(str(err))
            return EXIT_CONFIG
    commands = {'simulate': cmd_simulate, 'sweep': cmd_sweep, 'analytic': cmd_analytic}
    try:
        return commands[args.command](args)
    except (ValueError, FileNotFoundError) as err:
        # ConfigError and the validation errors of network and placement construction
        log.error(str(err))
        return EXIT_CONFIG
    except SimulationError as err:
        log.error(str(err))
        return EXIT_SIMULATION


if __name__ == '__main__':
    sys.exit(main())

#!/usr/bin/env python3
"""Traffic model of mirrored replication and simulation metrics.

The traffic of a pipeline write is the block size times the number of in-datacenter links its
copies traverse. Every hop D_{j-1} -> D_j first ascends from D_{j-1} toward the core and then
descends to D_j. Mirroring copies the client's segments inside the switches, which removes the
ascending part of every hop after the first.
"""
from __future__ import annotations

import concurrent.futures
import dataclasses
import itertools
import math

import numpy as np

from . import config
from .engine import SimulationError
from .logger import log
from .replication import CHAIN, MIRRORED, Cluster
from .topology import LEVELS, path_nodes

#: Client locations relative to D_1.
CLIENT_CLASSES = ('outside', 'co-server', 'co-rack', 'cross-rack')
#: Possible (ascending, descending) link counts of the client's hop per client class.
_FIRST_HOPS = {
    'outside': ((0, 3),),
    'co-server': ((0, 0),),
    'co-rack': ((1, 1),),
    'cross-rack': ((2, 2), (3, 3)),
}
#: Link counts of one direction of a hop between two data nodes.
_HOP_COUNTS = (1, 2, 3)


@dataclasses.dataclass(frozen=True)
class PlacementCase:
    """Link counts of a pipeline placement."""
    #: (ascending, descending) in-datacenter link counts of the hops c -> D_1, D_1 -> D_2, ...
    hops: tuple[tuple[int, int], ...]
    #: outside, co-server, co-rack, or cross-rack.
    client_class: str = 'outside'

    def __post_init__(self):
        """Validate the counts."""
        if self.client_class not in CLIENT_CLASSES:
            msg = f'Unknown client class "{self.client_class}", valid are {CLIENT_CLASSES}.'
            raise ValueError(msg)
        if not self.hops:
            msg = 'A placement needs at least the hop from the client to D_1.'
            raise ValueError(msg)
        for up, down in self.hops:
            if not (0 <= up <= 3 and 0 <= down <= 3):
                msg = f'Hop link counts have to be in [0, 3], got ({up}, {down}).'
                raise ValueError(msg)

    @property
    def k(self):
        """Replication factor."""
        return len(self.hops)


def l_total(case):
    """Number of in-datacenter links traversed by a chain write.

    Args:
        case (PlacementCase): Placement.

    Returns:
        int: Sum of ascending and descending links over all hops.
    """
    return sum(up + down for up, down in case.hops)


def eliminated_links(case):
    """Number of links mirroring removes from a chain write.

    The ascending links of every hop after the first are eliminated. A client on the server of D_1
    makes D_1 the source of the data, so its own ascent stays.

    Args:
        case (PlacementCase): Placement.

    Returns:
        int: Eliminated link count.
    """
    first = 2 if case.client_class == 'co-server' else 1
    return sum(up for up, _ in case.hops[first:])


def saving_ratio(case):
    """Fraction of link traversals saved by mirroring.

    Args:
        case (PlacementCase): Placement.

    Returns:
        float: Saving ratio in [0, 1), nan if no link is traversed at all.
    """
    total = l_total(case)
    if total == 0:
        return math.nan
    return eliminated_links(case) / total


def enumerate_cases(k, client_class, symmetric=True):
    """Enumerate the placement cases of a client class.

    Args:
        k (int): Replication factor.
        client_class (str): Client location.

    Keyword Args:
        symmetric (bool): Use equal ascending and descending counts per hop, as in a three-layer
            tree, or enumerate both directions independently.

    Returns:
        list[PlacementCase]: All cases.
    """
    if k < 1:
        msg = f'The replication factor has to be positive, got {k}.'
        raise ValueError(msg)
    if client_class not in _FIRST_HOPS:
        msg = f'Unknown client class "{client_class}", valid are {CLIENT_CLASSES}.'
        raise ValueError(msg)
    if symmetric:
        options = [(n, n) for n in _HOP_COUNTS]
    else:
        options = list(itertools.product(_HOP_COUNTS, repeat=2))
    return [PlacementCase((first, *rest), client_class)
            for first in _FIRST_HOPS[client_class]
            for rest in itertools.product(options, repeat=k - 1)]


def enumerate_average_savings(k, client_class=None, symmetric=True):
    """Average saving ratio over all placement cases.

    Every case of a class has the same weight. The pooled value gives every class the same weight.

    Args:
        k (int): Replication factor.

    Keyword Args:
        client_class (str | None): Client location, None pools all classes.
        symmetric (bool): See :func:`enumerate_cases`.

    Returns:
        float: Mean saving ratio.
    """
    if client_class is None:
        return float(np.mean([enumerate_average_savings(k, c, symmetric)
                              for c in CLIENT_CLASSES]))
    ratios = [saving_ratio(case) for case in enumerate_cases(k, client_class, symmetric)]
    ratios = [r for r in ratios if not math.isnan(r)]
    return float(np.mean(ratios)) if ratios else 0.0


def savings_table(ks=range(2, 6), symmetric=True):
    """Average saving ratios per replication factor and client class.

    Keyword Args:
        ks (Iterable[int]): Replication factors.
        symmetric (bool): See :func:`enumerate_cases`.

    Returns:
        list[dict]: One row per replication factor with a column per class and the pooled mean.
    """
    rows = []
    for k in ks:
        row = {'k': k}
        for c in CLIENT_CLASSES:
            row[c] = enumerate_average_savings(k, c, symmetric)
        row['pooled'] = float(np.mean([row[c] for c in CLIENT_CLASSES]))
        rows.append(row)
    return rows


def placement_case(t, client, nodes):
    """Derive the placement case of a concrete pipeline.

    Args:
        t (Topology): Network.
        client (int): Client node.
        nodes (list[int]): Data nodes D_1 to D_k.

    Returns:
        PlacementCase: Link counts along the chain, external links are not counted.
    """
    members = [client, *nodes]
    hops = []
    for src, dst in zip(members, members[1:]):
        up = down = 0
        if src != dst:
            path = path_nodes(t, src, dst)
            for u, v in zip(path, path[1:]):
                if 'external' in (t.roles[u], t.roles[v]):
                    continue
                if LEVELS[t.roles[v]] > LEVELS[t.roles[u]]:
                    up += 1
                else:
                    down += 1
        hops.append((up, down))
    if t.roles[client] == 'external':
        client_class = 'outside'
    elif client == nodes[0]:
        client_class = 'co-server'
    elif t.rack.get(client) == t.rack.get(nodes[0]):
        client_class = 'co-rack'
    else:
        client_class = 'cross-rack'
    return PlacementCase(tuple(hops), client_class)


@dataclasses.dataclass
class RunMetrics:
    """Results of one simulated scenario and mode."""
    scenario: str
    mode: str
    k: int
    #: Net data transfer time summed over all blocks.
    data_time: int
    #: Time from the first request to the last completion.
    total_time: int
    #: Downstream payload bytes on in-datacenter links per block byte.
    payload_link_traversals: float
    #: Wire bytes of payload-free frames on in-datacenter links.
    ack_bytes: int
    retx: int
    early_acks: int
    #: Analytic saving ratio of the first block's placement.
    saving_ratio: float
    #: Delivered payload bytes per (link id, sending node).
    link_payload: dict = dataclasses.field(default_factory=dict)
    #: Delivered wire bytes per (link id, sending node).
    link_total: dict = dataclasses.field(default_factory=dict)
    #: Data nodes per block.
    placements: list = dataclasses.field(default_factory=list)
    #: Replica equality per block.
    replicas_ok: bool = True
    #: Highest number of outstanding HDFS packets.
    max_outstanding: int = 0
    trace: list = dataclasses.field(default_factory=list)

    def row(self):
        """CSV row."""
        ratio = 'NA' if math.isnan(self.saving_ratio) else f'{self.saving_ratio:.4f}'
        return [self.scenario, self.mode, self.k, self.data_time, self.total_time,
                f'{self.payload_link_traversals:.4f}', self.ack_bytes, self.retx,
                self.early_acks, ratio]


def collect_metrics(cluster, sessions):
    """Gather the metrics of a finished cluster run.

    Args:
        cluster (Cluster): Simulated cluster.
        sessions (list[WriteSession]): Completed sessions.

    Returns:
        RunMetrics: Metrics of the run.
    """
    cfg = cluster.cfg
    channels = cluster.fabric.link_counters()
    conns = cluster.connections()
    block_bytes = sum(s.block.size for s in sessions)
    first = sessions[0].spec
    case = placement_case(cluster.topology, first.client.node, [d.node for d in first.datanodes])
    audit = cluster.audit()
    return RunMetrics(
        scenario=cfg.name,
        mode=cluster.mode,
        k=cfg.replication.k,
        data_time=sum(s.data_time for s in sessions),
        total_time=max(s.done for s in sessions) - min(s.requested for s in sessions),
        payload_link_traversals=sum(cluster.downstream_bytes.values()) / block_bytes,
        ack_bytes=sum(ch.ack_bytes for ch in channels.values()),
        retx=sum(c.counters['retx'] for c in conns),
        early_acks=sum(c.counters['early_acks'] for c in conns),
        saving_ratio=saving_ratio(case),
        link_payload={key: ch.payload_bytes for key, ch in channels.items()},
        link_total={key: ch.total_bytes for key, ch in channels.items()},
        placements=[[d.node for d in s.spec.datanodes] for s in sessions],
        replicas_ok=all(all(ok) for ok in audit.values()),
        max_outstanding=max(s.max_outstanding for s in sessions),
        trace=list(cluster.sim.lines),
    )


def run_scenario(cfg, modes=None, verbose=None):
    """Simulate a scenario in every requested mode.

    Args:
        cfg (ScenarioConfig): Scenario.

    Keyword Args:
        modes (Iterable[str] | None): Modes to run, defaults to the scenario's modes.
        verbose (int | str | None): Level of output.

    Returns:
        dict[str, RunMetrics]: Metrics per mode.
    """
    results = {}
    for mode in modes or cfg.replication.modes:
        cluster = Cluster(cfg, mode, verbose=verbose)
        metrics = collect_metrics(cluster, cluster.run())
        if not metrics.replicas_ok:
            msg = f'Scenario "{cfg.name}" ({mode}) finished with diverging replicas.'
            raise SimulationError(msg)
        results[mode] = metrics
    return results


def _sweep_job(cfg):
    """Worker entry point of :func:`sweep`."""
    return cfg.replication.k, run_scenario(cfg, modes=(CHAIN, MIRRORED))


def sweep(cfg, ks=range(2, 6), workers=None):
    """Run a scenario for several replication factors in both modes.

    Args:
        cfg (ScenarioConfig): Base scenario.

    Keyword Args:
        ks (Iterable[int]): Replication factors.
        workers (int | None): Worker processes, uses the global configuration for None.

    Returns:
        list[RunMetrics]: Metrics ordered by replication factor, chain before mirrored.
    """
    if workers is None:
        workers = config.workers or 1
    configs = [cfg.replace(name=f'{cfg.name}-k{k}', replication__k=k, replication__placement=None)
               for k in ks]
    if workers > 1:
        log.info(f'Running {len(configs)} scenarios on {workers} workers.')
        with concurrent.futures.ProcessPoolExecutor(max_workers=workers) as pool:
            results = dict(pool.map(_sweep_job, configs))
    else:
        results = dict(_sweep_job(c) for c in configs)
    return [results[k][mode] for k in sorted(results) for mode in (CHAIN, MIRRORED)]

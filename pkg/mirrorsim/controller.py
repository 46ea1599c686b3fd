#!/usr/bin/env python3
"""SDN controller application that programs mirroring along a replication pipeline.

For a pipeline c -> D_1 -> ... -> D_k the controller builds the distribution tree of the client's
segments. Every switch on a path from the client to a data node forwards the segments to the
interfaces toward the data nodes, except the one the segments arrived on. Copies that leave toward a
data node D_j (j >= 2) get their headers rewritten, so that D_j believes they were sent by D_{j-1}.
"""
from __future__ import annotations

import dataclasses

from .fabric import FlowEntry, MatchFields, Output, SetField
from .logger import create_logger, get_level

#: Priority of mirroring entries, above any default rule.
MIRROR_PRIORITY = 100


@dataclasses.dataclass(frozen=True)
class Endpoint:
    """Transport endpoint of a pipeline member."""
    node: int
    ip: str
    #: Listening port, or the connection's local port for the client.
    port: int
    #: Local port of the connection to the successor.
    out_port: int | None = None


@dataclasses.dataclass(frozen=True)
class PipelineSpec:
    """Pipeline information the Name Node hands to the controller."""
    #: Id of the pipeline, used as cookie of all installed entries.
    pipeline_id: int
    client: Endpoint
    #: Data nodes D_1 to D_k in pipeline order.
    datanodes: tuple[Endpoint, ...]

    def __post_init__(self):
        """Validate the pipeline."""
        if not self.datanodes:
            msg = 'A pipeline needs at least one data node.'
            raise ValueError(msg)
        nodes = [d.node for d in self.datanodes]
        if len(set(nodes)) != len(nodes):
            msg = f'Data nodes have to be distinct, got {nodes}.'
            raise ValueError(msg)
        if self.client.node in nodes:
            msg = f'The client node {self.client.node} cannot be a data node of its own pipeline.'
            raise ValueError(msg)

    @property
    def k(self):
        """Replication factor."""
        return len(self.datanodes)

    @property
    def members(self):
        """Client followed by the data nodes."""
        return (self.client, *self.datanodes)


@dataclasses.dataclass(frozen=True)
class SwitchPlan:
    """Distribution tree state of one switch."""
    #: Interface toward the client.
    client_if: object
    #: Interfaces toward the data nodes.
    target_ifs: frozenset
    #: Interfaces the client's segments are copied to, ordered by port.
    forwarding: tuple
    #: Pipeline positions (1 for D_1) reached through each forwarding interface.
    targets: dict


#: Distribution tree as switch -> SwitchPlan.
TreePlan = dict


def _walk(egress, t, src, dst):
    """Switches and their egress interfaces from an end host to a destination."""
    # End hosts have a single link, the first switch is its other end
    node = t.links[t.ports[src][0]].remote(src).node
    hops = []
    while node != dst:
        interface = egress(node, dst)
        hops.append((node, interface))
        node = t.peer(interface).node
    return hops


def compute_tree(t, spec, egress=None):
    """Compute the distribution tree of a pipeline.

    Args:
        t (Topology): Network.
        spec (PipelineSpec): Pipeline.

    Keyword Args:
        egress (Callable | None): Egress lookup (switch, destination) -> Interface, defaults to
            :func:`~mirrorsim.topology.egress_interface`.

    Returns:
        TreePlan: SwitchPlan per switch on any path from the client to a data node.
    """
    if egress is None:
        from .topology import egress_interface

        def egress(sw, dst):
            return egress_interface(t, sw, dst)

    for member in spec.members:
        t.check_node(member.node)
    client = spec.client.node
    target_ifs: dict[int, dict] = {}
    for position, d in enumerate(spec.datanodes, start=1):
        for sw, interface in _walk(egress, t, client, d.node):
            target_ifs.setdefault(sw, {}).setdefault(interface, []).append(position)

    plan = {}
    for sw in sorted(target_ifs):
        client_if = egress(sw, client)
        forwarding = tuple(sorted((i for i in target_ifs[sw] if i != client_if),
                                  key=lambda i: i.port))
        plan[sw] = SwitchPlan(client_if, frozenset(target_ifs[sw]), forwarding,
                              {i: tuple(target_ifs[sw][i]) for i in forwarding})
    return plan


def program_mirroring(t, plan, spec):
    """Create the mirroring flow entries of a distribution tree.

    Every switch gets one entry that matches the client's connection to D_1. Outputs toward D_1 come
    first, then outputs toward other switches, and finally the rewrite and output pair of every data
    node D_j (j >= 2) attached to the switch.

    Args:
        t (Topology): Network.
        plan (TreePlan): Distribution tree from :func:`compute_tree`.
        spec (PipelineSpec): Pipeline with all connection ports registered.

    Returns:
        list[tuple[int, FlowEntry]]: Entries to install per switch.
    """
    d1 = spec.datanodes[0]
    match = MatchFields(src_ip=spec.client.ip, dst_ip=d1.ip, src_port=spec.client.port,
                        dst_port=d1.port, protocol='tcp')
    installs = []
    for sw, sp in sorted(plan.items()):
        first, relayed, rewritten = [], [], []
        for interface in sp.forwarding:
            peer = t.peer(interface).node
            positions = sp.targets[interface]
            host_target = [p for p in positions if spec.datanodes[p - 1].node == peer]
            if not host_target:
                relayed.append(Output(interface))
            elif host_target[0] == 1:
                first.append(Output(interface))
            else:
                rewritten.extend(_rewrite(spec, host_target[0]))
                rewritten.append(Output(interface))
        actions = tuple(first + relayed + rewritten)
        installs.append((sw, FlowEntry(MIRROR_PRIORITY, match, actions, cookie=spec.pipeline_id)))
    return installs


def _rewrite(spec, position):
    """Set-field actions that make a copy look like a segment from D_{j-1} to D_j."""
    prev = spec.datanodes[position - 2]
    node = spec.datanodes[position - 1]
    if prev.out_port is None:
        msg = f'The connection port of pipeline position {position - 1} is not registered.'
        raise ValueError(msg)
    # Each rewrite sets all fields, so consecutive rewrites on one switch never mix
    return [SetField('src_ip', prev.ip), SetField('src_port', prev.out_port),
            SetField('dst_ip', node.ip), SetField('dst_port', node.port),
            SetField('reserved', 1)]


def format_plan(t, installs):
    """Human-readable dump of mirroring entries.

    Args:
        t (Topology): Network.
        installs (list[tuple[int, FlowEntry]]): Entries per switch.

    Returns:
        str: One line per entry.
    """
    lines = []
    for sw, entry in installs:
        m = entry.match
        match = f'{m.src_ip}:{m.src_port}>{m.dst_ip}:{m.dst_port}/{m.protocol}'
        actions = ' '.join(str(a) for a in entry.actions)
        lines.append(f'{t.names[sw]:<8} prio={entry.priority} match={match} -> {actions}')
    return '\n'.join(lines)


class Controller:
    """Controller that installs and removes mirroring entries.

    Args:
        fabric (Fabric): Data plane to program.

    Keyword Args:
        verbose (int | str | None): Level of output.
    """
    def __init__(self, fabric, verbose=None):
        """Initialize the Controller object."""
        self.fabric = fabric
        self.topology = fabric.topology
        #: Installed entries per pipeline id.
        self.installed: dict[int, list] = {}
        self._log = create_logger(self, sim=fabric.sim)
        self.verbose = verbose

    @property
    def verbose(self):
        """Verbosity level."""
        return self._verbose

    @verbose.setter
    def verbose(self, level):
        self._verbose = get_level(level)
        self._log.verbose = self._verbose

    def install(self, spec):
        """Program the mirroring of a pipeline.

        Args:
            spec (PipelineSpec): Pipeline with all connection ports registered.

        Returns:
            list[tuple[int, FlowEntry]]: Installed entries.
        """
        plan = compute_tree(self.topology, spec, egress=self.fabric.egress)
        installs = program_mirroring(self.topology, plan, spec)
        for sw, entry in installs:
            self.fabric.install_entry(sw, entry)
        self.installed[spec.pipeline_id] = installs
        self.fabric.sim.trace('install', spec.pipeline_id, len(installs))
        self._log.debug(f'Pipeline {spec.pipeline_id}:\n{format_plan(self.topology, installs)}')
        return installs

    def teardown(self, spec):
        """Remove the mirroring entries of a pipeline, unknown pipelines are ignored.

        Args:
            spec (PipelineSpec | int): Pipeline or its id.

        Returns:
            int: Number of removed entries.
        """
        pipeline_id = spec if isinstance(spec, int) else spec.pipeline_id
        if self.installed.pop(pipeline_id, None) is None:
            return 0
        removed = self.fabric.remove_entries(pipeline_id)
        self.fabric.sim.trace('teardown', pipeline_id, removed)
        return removed

    def teardown_all(self):
        """Remove the entries of every installed pipeline."""
        return sum(self.teardown(pipeline_id) for pipeline_id in list(self.installed))

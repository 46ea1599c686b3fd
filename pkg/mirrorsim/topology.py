#!/usr/bin/env python3
"""Three-layer data center network model and routing queries.

Nodes are numbered breadth-first from the core: core switches first, then aggregation switches,
edge (top-of-rack) switches, and hosts. Routing follows minimal-hop paths and breaks ties by the
lowest next-node id, so every query is deterministic.
"""
from __future__ import annotations

import dataclasses
import ipaddress
from typing import NamedTuple

import numpy as np
from scipy.sparse import csgraph, csr_matrix

from .units import Gbps, us

#: Role tags of switches.
SWITCH_ROLES = ('core', 'aggregation', 'edge')
#: Layer of each role, used to tell ascending from descending link traversals.
LEVELS = {'host': 0, 'edge': 1, 'aggregation': 2, 'core': 3}
#: Role pairs that may share a link.
ALLOWED_LINKS = {
    frozenset(('host', 'edge')),
    frozenset(('edge', 'aggregation')),
    frozenset(('aggregation', 'core')),
    frozenset(('external', 'core')),
}
#: Address of the external client.
EXTERNAL_IP = '192.0.2.1'


class Interface(NamedTuple):
    """Interface of a node."""
    node: int
    port: int


@dataclasses.dataclass(frozen=True)
class LinkParams:
    """Physical parameters of a link."""
    #: Propagation delay in nanoseconds.
    delay: int = 5 * us
    #: Link rate in bits per second.
    bandwidth: int = Gbps
    #: Drop probability per direction.
    loss: float = 0.0

    def __post_init__(self):
        """Validate the parameters."""
        if self.delay < 0:
            msg = f'The link delay has to be non-negative, got {self.delay}.'
            raise ValueError(msg)
        if self.bandwidth <= 0:
            msg = f'The link bandwidth has to be positive, got {self.bandwidth}.'
            raise ValueError(msg)
        if not 0 <= self.loss <= 1:
            msg = f'The drop probability has to be in [0, 1], got {self.loss}.'
            raise ValueError(msg)


@dataclasses.dataclass(frozen=True)
class Link:
    """Full-duplex link between two interfaces."""
    id: int
    a: Interface
    b: Interface
    params: LinkParams
    #: External links connect the data center to the outside and are not counted as traffic.
    external: bool = False

    def local(self, node):
        """Interface of the link on a given node."""
        if node == self.a.node:
            return self.a
        if node == self.b.node:
            return self.b
        msg = f'Node {node} is no endpoint of link {self.id}.'
        raise KeyError(msg)

    def remote(self, node):
        """Interface of the link on the opposite node."""
        return self.b if self.local(node) == self.a else self.a


class Topology:
    """Graph of switches and hosts.

    Topologies are filled by the constructor functions and only read afterwards.
    """
    def __init__(self):
        """Initialize the Topology object."""
        self.roles: list[str] = []          #: Role tag per node id.
        self.names: list[str] = []          #: Human-readable name per node id.
        self.links: list[Link] = []         #: Links by link id.
        self.ports: list[list[int]] = []    #: Link id per local port of every node.
        self.rack: dict[int, int] = {}      #: Edge switch of every host.
        self.ip: dict[int, str] = {}        #: Address of every host.
        self.nodes_by_ip: dict[str, int] = {}
        self._distances = None

    def __repr__(self):
        """Print a short summary."""
        counts = {role: self.roles.count(role) for role in (*SWITCH_ROLES, 'host', 'external')}
        summary = ', '.join(f'{n} {role}' for role, n in counts.items() if n)
        return f'Topology({summary}, {len(self.links)} links)'

    # ### Construction ###

    def add_node(self, role, name=None, ip=None):
        """Add a node.

        Args:
            role (str): Role tag.

        Keyword Args:
            name (str | None): Node name.
            ip (str | None): Address of the node.

        Returns:
            int: Node id.
        """
        if role not in LEVELS and role != 'external':
            msg = f'Unknown node role "{role}".'
            raise ValueError(msg)
        node = len(self.roles)
        self.roles.append(role)
        self.names.append(name if name is not None else f'{role}{node}')
        self.ports.append([])
        if ip is not None:
            ip = str(ipaddress.IPv4Address(ip))
            if ip in self.nodes_by_ip:
                msg = f'Address {ip} is already in use.'
                raise ValueError(msg)
            self.ip[node] = ip
            self.nodes_by_ip[ip] = node
        self._distances = None
        return node

    def add_link(self, a, b, params=None, external=False):
        """Connect two nodes.

        Args:
            a (int): First node.
            b (int): Second node.

        Keyword Args:
            params (LinkParams | None): Physical parameters.
            external (bool): Whether the link leaves the data center.

        Returns:
            int: Link id.
        """
        if a == b:
            msg = f'Cannot link node {a} with itself.'
            raise ValueError(msg)
        link = Link(len(self.links), Interface(a, len(self.ports[a])),
                    Interface(b, len(self.ports[b])), params or LinkParams(), external)
        self.links.append(link)
        self.ports[a].append(link.id)
        self.ports[b].append(link.id)
        self._distances = None
        return link.id

    # ### Queries ###

    @property
    def nodes(self):
        """All node ids."""
        return range(len(self.roles))

    @property
    def hosts(self):
        """Host ids."""
        return [n for n in self.nodes if self.roles[n] == 'host']

    @property
    def switches(self):
        """Switch ids."""
        return [n for n in self.nodes if self.roles[n] in SWITCH_ROLES]

    def is_switch(self, node):
        """Check if a node is a switch."""
        return self.roles[node] in SWITCH_ROLES

    def check_node(self, node):
        """Raise if a node id does not exist."""
        if not 0 <= node < len(self.roles):
            msg = f'Unknown node {node}.'
            raise KeyError(msg)

    def link_at(self, interface):
        """Link attached to an interface."""
        return self.links[self.ports[interface.node][interface.port]]

    def peer(self, interface):
        """Interface on the other end of the link attached to an interface."""
        return self.link_at(interface).remote(interface.node)

    def neighbors(self, node):
        """Neighbors of a node.

        Args:
            node (int): Node id.

        Returns:
            list[tuple[int, Interface, Link]]: Neighbor id, local interface, and link per port.
        """
        out = []
        for port, link_id in enumerate(self.ports[node]):
            link = self.links[link_id]
            out.append((link.remote(node).node, Interface(node, port), link))
        return out

    def rack_hosts(self, edge):
        """Hosts attached to an edge switch."""
        return [h for h in self.hosts if self.rack.get(h) == edge]

    @property
    def distances(self):
        """Hop distance matrix, unreachable pairs are inf."""
        if self._distances is None:
            n = len(self.roles)
            rows = [link.a.node for link in self.links] + [link.b.node for link in self.links]
            cols = [link.b.node for link in self.links] + [link.a.node for link in self.links]
            graph = csr_matrix((np.ones(len(rows)), (rows, cols)), shape=(n, n))
            self._distances = csgraph.shortest_path(graph, directed=False, unweighted=True)
        return self._distances


def build_three_layer(core_count, agg_per_core, racks_per_agg, hosts_per_rack, link_params=None):
    """Build a three-layer data center network.

    Every aggregation switch connects to every core switch, every edge switch to one aggregation
    switch, and every host to one edge switch. Hosts get the address 10.x.y.(h+1) of their rack.

    Args:
        core_count (int): Number of core switches.
        agg_per_core (int): Number of aggregation switches per core switch.
        racks_per_agg (int): Number of edge switches per aggregation switch.
        hosts_per_rack (int): Number of hosts per edge switch.

    Keyword Args:
        link_params (LinkParams | None): Parameters of all links.

    Returns:
        Topology: Network with hosts + edges + aggregations x cores links.
    """
    counts = {'core_count': core_count, 'agg_per_core': agg_per_core,
              'racks_per_agg': racks_per_agg, 'hosts_per_rack': hosts_per_rack}
    for name, value in counts.items():
        if int(value) != value or value < 1:
            msg = f'{name} has to be a positive integer, got {value}.'
            raise ValueError(msg)
    if hosts_per_rack > 254:
        msg = f'At most 254 hosts per rack are supported, got {hosts_per_rack}.'
        raise ValueError(msg)

    t = Topology()
    cores = [t.add_node('core', f'core{i}') for i in range(core_count)]
    aggs = [t.add_node('aggregation', f'agg{i}') for i in range(core_count * agg_per_core)]
    edges = [t.add_node('edge', f'edge{i}') for i in range(len(aggs) * racks_per_agg)]
    for rack, edge in enumerate(edges):
        for h in range(hosts_per_rack):
            ip = f'10.{rack // 256}.{rack % 256}.{h + 1}'
            host = t.add_node('host', f'host{rack * hosts_per_rack + h}', ip)
            t.rack[host] = edge

    # Links are added top-down, so link ids follow the node numbering
    # Aggregation switches connect to every core, not only to their own one. Shortest paths between
    # hosts keep their length, and ties break toward the lowest core id.
    for agg in aggs:
        for core in cores:
            t.add_link(core, agg, link_params)
    for i, edge in enumerate(edges):
        t.add_link(aggs[i // racks_per_agg], edge, link_params)
    for host in t.hosts:
        t.add_link(t.rack[host], host, link_params)
    return t


def attach_external(t, core=0, link_params=None, name='client'):
    """Attach an external client to a core switch.

    Args:
        t (Topology): Data center network, modified in place.

    Keyword Args:
        core (int): Core switch to attach to.
        link_params (LinkParams | None): Parameters of the external link.
        name (str): Name of the client node.

    Returns:
        int: Node id of the client.
    """
    t.check_node(core)
    if t.roles[core] != 'core':
        msg = f'External clients attach to core switches, node {core} is a {t.roles[core]}.'
        raise ValueError(msg)
    client = t.add_node('external', name, EXTERNAL_IP)
    t.add_link(core, client, link_params, external=True)
    return client


class ExampleNetwork(NamedTuple):
    """Small reference network with named nodes and numbered link traversals."""
    topology: Topology
    #: Node id by name.
    nodes: dict[str, int]
    #: Directed link traversal (link id, sending node) by number.
    hops: dict[int, tuple[int, int]]


def example_topology(link_params=None):
    """Build the reference network of one core, two aggregation, and two edge switches.

    An external client hangs off the core switch, D1 and D2 share the rack of tor1 and D3 sits in
    the rack of tor2, which hang off agg1 and agg2, respectively. The pipeline traverses the
    numbered hops 1 to 12: 1-4 from the client down to D1, 5-6 from D1 over the shared edge switch
    to D2, and 7-12 from D2 over the core to D3.

    Keyword Args:
        link_params (LinkParams | None): Parameters of all links.

    Returns:
        ExampleNetwork: Topology, node names, and numbered hops.
    """
    t = build_three_layer(1, 2, 1, 3, link_params)
    client = attach_external(t, 0, link_params)
    nodes = {'core': 0, 'agg1': 1, 'agg2': 2, 'tor1': 3, 'tor2': 4, 'D1': 5, 'D2': 6, 'D3': 8,
             'client': client}
    route = [client, 0, 1, 3, 5, 3, 6, 3, 1, 0, 2, 4, 8]
    hops = {}
    for number, (u, v) in enumerate(zip(route, route[1:]), start=1):
        link = next(link for nb, _, link in t.neighbors(u) if nb == v)
        hops[number] = (link.id, u)
    return ExampleNetwork(t, nodes, hops)


def shortest_path(t, src, dst):
    """Minimal-hop path between two nodes.

    Ties are broken by the lowest next-node id.

    Args:
        t (Topology): Network.
        src (int): Start node.
        dst (int): End node.

    Returns:
        list[int]: Link ids in traversal order.
    """
    t.check_node(src)
    t.check_node(dst)
    if src == dst:
        msg = f'Source and destination are the same node {src}.'
        raise ValueError(msg)
    dist = t.distances[:, dst]
    if not np.isfinite(dist[src]):
        msg = f'Node {dst} is unreachable from node {src}.'
        raise ValueError(msg)
    path = []
    node = src
    while node != dst:
        nb, _, link = min((n for n in t.neighbors(node) if dist[n[0]] == dist[node] - 1),
                          key=lambda n: n[0])
        path.append(link.id)
        node = nb
    return path


def path_nodes(t, src, dst):
    """Nodes visited by :func:`shortest_path`, including both ends."""
    nodes = [src]
    for link_id in shortest_path(t, src, dst):
        nodes.append(t.links[link_id].remote(nodes[-1]).node)
    return nodes


def egress_interface(t, sw, dst):
    """Interface a switch uses to reach a destination.

    Args:
        t (Topology): Network.
        sw (int): Switch.
        dst (int): Destination node.

    Returns:
        Interface: First interface on the shortest path from the switch to the destination.
    """
    t.check_node(sw)
    if not t.is_switch(sw):
        msg = f'Node {sw} is a {t.roles[sw]}, not a switch.'
        raise ValueError(msg)
    if sw == dst:
        msg = f'The destination is the switch {sw} itself.'
        raise ValueError(msg)
    first = t.links[shortest_path(t, sw, dst)[0]]
    return first.local(sw)


def check_topology(t):
    """Validate the structural invariants of a network.

    Args:
        t (Topology): Network.

    Returns:
        bool: True, errors are raised otherwise.
    """
    if len(t.roles) > 1 and not np.all(np.isfinite(t.distances)):
        msg = 'The network is not connected.'
        raise ValueError(msg)
    for host in t.hosts:
        edges = [nb for nb, _, _ in t.neighbors(host) if t.roles[nb] == 'edge']
        if len(t.ports[host]) != 1 or len(edges) != 1 or t.rack.get(host) != edges[0]:
            msg = f'Host {host} has to be attached to exactly one edge switch.'
            raise ValueError(msg)
    for link in t.links:
        pair = frozenset((t.roles[link.a.node], t.roles[link.b.node]))
        if pair not in ALLOWED_LINKS:
            msg = f'Link {link.id} connects {"-".join(sorted(pair))}, breaking the layering.'
            raise ValueError(msg)
        if link.external != ('external' in pair):
            msg = f'Link {link.id} has an inconsistent external flag.'
            raise ValueError(msg)
    return True

#!/usr/bin/env python3
"""SDN switch data plane.

Switches hold flow tables with prioritized entries. An entry carries an ordered action list of
set-field and output actions: set-fields accumulate, and every output emits a copy of the frame
with all set-fields applied so far. Frames that match no entry follow destination-based routing.
"""
from __future__ import annotations

import collections
import dataclasses
import functools
from typing import Any, Union

from .engine import Channel, TimingParams
from .logger import create_logger, get_level
from .topology import Interface, egress_interface

#: Header fields that entries can match on.
MATCH_FIELDS = ('src_ip', 'dst_ip', 'src_port', 'dst_port', 'protocol')
#: Header fields that set-field actions can rewrite.
SET_FIELDS = (*MATCH_FIELDS, 'reserved')


@dataclasses.dataclass(frozen=True)
class MatchFields:
    """Match on the addressing 5-tuple, None is a wildcard."""
    src_ip: str | None = None
    dst_ip: str | None = None
    src_port: int | None = None
    dst_port: int | None = None
    protocol: str | None = None

    @property
    def is_wildcard(self):
        """Whether all fields are wildcards."""
        return all(getattr(self, f) is None for f in MATCH_FIELDS)

    def matches(self, frame):
        """Check if a frame matches.

        Args:
            frame: Frame with addressing fields.

        Returns:
            bool: True if every concrete field equals the frame's field.
        """
        for f in MATCH_FIELDS:
            value = getattr(self, f)
            if value is not None and getattr(frame, f) != value:
                return False
        return True


@dataclasses.dataclass(frozen=True)
class SetField:
    """Rewrite one header field."""
    field: str
    value: Any

    def __post_init__(self):
        """Validate the field."""
        if self.field not in SET_FIELDS:
            msg = f'Cannot set field "{self.field}", valid fields are {SET_FIELDS}.'
            raise ValueError(msg)
        if self.field == 'reserved' and self.value not in (0, 1, 2):
            msg = f'The reserved flag has to be 0, 1, or 2, got {self.value}.'
            raise ValueError(msg)

    def __str__(self):
        """Short representation for plan dumps."""
        return f'set({self.field}={self.value})'


@dataclasses.dataclass(frozen=True)
class Output:
    """Emit a copy of the frame on an interface."""
    interface: Interface

    def __str__(self):
        """Short representation for plan dumps."""
        return f'output({self.interface.port})'


Action = Union[SetField, Output]


@dataclasses.dataclass(frozen=True)
class FlowEntry:
    """Switch rule."""
    #: Higher priorities win.
    priority: int
    match: MatchFields
    #: Ordered action list.
    actions: tuple[Action, ...]
    #: Opaque tag to remove a group of entries, e.g., the pipeline id.
    cookie: Any = None


class FlowTable:
    """Flow table of one switch."""
    def __init__(self):
        """Initialize the FlowTable object."""
        #: Installed entries and their ids in installation order.
        self.entries: list[tuple[int, FlowEntry]] = []
        self._next_id = 0

    def __len__(self):
        """Number of installed entries."""
        return len(self.entries)

    def install(self, entry):
        """Install an entry, identical entries are installed once.

        Args:
            entry (FlowEntry): Entry to install.

        Returns:
            int: Id of the (already) installed entry.
        """
        for entry_id, e in self.entries:
            if e == entry:
                return entry_id
        entry_id = self._next_id
        self._next_id += 1
        self.entries.append((entry_id, entry))
        return entry_id

    def lookup(self, frame):
        """Select the entry for a frame.

        Args:
            frame: Frame with addressing fields.

        Returns:
            tuple[int, FlowEntry] | None: Highest-priority match, the earliest installed on ties.
        """
        best = None
        for entry_id, entry in self.entries:
            if (best is None or entry.priority > best[1].priority) and entry.match.matches(frame):
                best = (entry_id, entry)
        return best

    def remove(self, cookie):
        """Remove all entries with a cookie.

        Args:
            cookie: Cookie of the entries.

        Returns:
            int: Number of removed entries.
        """
        before = len(self.entries)
        self.entries = [(i, e) for i, e in self.entries if e.cookie != cookie]
        return before - len(self.entries)


class Fabric:
    """Switches, links, and host network interfaces of one simulation.

    Args:
        sim (Simulator): Simulator.
        topology (Topology): Network.

    Keyword Args:
        timing (TimingParams | None): Processing delays.
        verbose (int | str | None): Level of output.
    """
    def __init__(self, sim, topology, timing=None, verbose=None):
        """Initialize the Fabric object."""
        self.sim = sim
        self.topology = topology
        self.timing = timing or TimingParams()
        #: Flow table per switch.
        self.tables = {sw: FlowTable() for sw in topology.switches}
        #: Channel per (link id, sending node).
        self.channels: dict[tuple[int, int], Channel] = {}
        for link in topology.links:
            for direction, (src, dst) in enumerate(((link.a, link.b), (link.b, link.a))):
                self.channels[link.id, src.node] = Channel(
                    sim, link.id, direction, link.params.delay, link.params.bandwidth,
                    functools.partial(self._arrive, dst), loss=link.params.loss,
                    external=link.external)
        #: Receive handler per host.
        self.handlers: dict[int, Any] = {}
        #: Frames sent by hosts per (node, destination address).
        self.emitted: collections.Counter = collections.Counter()
        #: Diagnostic counters, e.g., frames to unknown addresses.
        self.diagnostics: collections.Counter = collections.Counter()
        self._egress: dict[tuple[int, int], Interface] = {}
        self._log = create_logger(self, sim=sim)
        self.verbose = verbose

    @property
    def verbose(self):
        """Verbosity level."""
        return self._verbose

    @verbose.setter
    def verbose(self, level):
        self._verbose = get_level(level)
        self._log.verbose = self._verbose

    def attach(self, node, handler):
        """Register the receive handler of an end host.

        Args:
            node (int): Host or external node.
            handler (Callable): Called with every arriving frame.
        """
        self.topology.check_node(node)
        if self.topology.is_switch(node):
            msg = f'Node {node} is a switch, only end hosts have receive handlers.'
            raise ValueError(msg)
        self.handlers[node] = handler

    def install_entry(self, sw, entry):
        """Install a flow entry on a switch.

        Args:
            sw (int): Switch.
            entry (FlowEntry): Entry to install.

        Returns:
            int: Entry id.
        """
        if sw not in self.tables:
            msg = f'Node {sw} is no switch of this fabric.'
            raise ValueError(msg)
        for action in entry.actions:
            if isinstance(action, Output) and (
                    action.interface.node != sw
                    or not 0 <= action.interface.port < len(self.topology.ports[sw])):
                msg = f'Output interface {action.interface} does not belong to switch {sw}.'
                raise ValueError(msg)
        entry_id = self.tables[sw].install(entry)
        self.sim.trace('flow-add', sw, entry_id, entry.priority, entry.cookie)
        return entry_id

    def remove_entries(self, cookie):
        """Remove all entries with a cookie from every switch.

        Args:
            cookie: Cookie of the entries.

        Returns:
            int: Number of removed entries.
        """
        removed = 0
        for sw, table in self.tables.items():
            n = table.remove(cookie)
            if n:
                self.sim.trace('flow-del', sw, cookie, n)
            removed += n
        return removed

    def egress(self, sw, dst):
        """Cached :func:`~mirrorsim.topology.egress_interface`."""
        key = (sw, dst)
        if key not in self._egress:
            self._egress[key] = egress_interface(self.topology, sw, dst)
        return self._egress[key]

    def process_frame(self, sw, in_if, frame):
        """Apply the flow table of a switch to a frame.

        Args:
            sw (int): Switch.
            in_if (Interface): Interface the frame arrived on.
            frame: Frame with addressing fields.

        Returns:
            list[tuple[Interface, Any]]: Emitted frames and their output interfaces.
        """
        if sw not in self.tables:
            msg = f'Node {sw} is no switch of this fabric.'
            raise ValueError(msg)
        hit = self.tables[sw].lookup(frame)
        out = []
        if hit is not None:
            entry_id, entry = hit
            current = frame
            for action in entry.actions:
                if isinstance(action, SetField):
                    current = dataclasses.replace(current, **{action.field: action.value})
                elif action.interface != in_if:
                    out.append((action.interface, current))
        else:
            entry_id = 'miss'
            dst = self.topology.nodes_by_ip.get(frame.dst_ip)
            if dst is None or dst == sw:
                self.diagnostics['unroutable'] += 1
                self._log.debug(f'Switch {sw} dropped a frame to unknown address {frame.dst_ip}.')
            else:
                interface = self.egress(sw, dst)
                if interface != in_if:
                    out.append((interface, frame))
        self.sim.trace('switch', sw, entry_id, in_if.port,
                       ','.join(str(i.port) for i, _ in out) or '-')
        return out

    def send(self, node, frame):
        """Transmit a frame from an end host.

        Args:
            node (int): Sending host.
            frame: Frame to transmit.
        """
        self.emitted[node, frame.dst_ip] += 1
        link_id = self.topology.ports[node][0]
        self.channels[link_id, node].transmit(frame)

    def _forward(self, sw, in_if, frame):
        """Switch frame handling after the forwarding latency."""
        for interface, out in self.process_frame(sw, in_if, frame):
            link_id = self.topology.ports[sw][interface.port]
            self.channels[link_id, sw].transmit(out)

    def _arrive(self, interface, frame):
        """Frame arrival at the end of a channel."""
        node = interface.node
        if node in self.tables:
            self.sim.schedule(self.timing.switch_delay, self._forward, node, interface, frame)
            return
        handler = self.handlers.get(node)
        if handler is None:
            self.diagnostics['no_handler'] += 1
            return
        handler(frame)

    def link_counters(self, external=False):
        """Channel counters of the network.

        Keyword Args:
            external (bool): Include channels of external links.

        Returns:
            dict[tuple[int, int], Channel]: Channels by (link id, sending node).
        """
        return {key: ch for key, ch in self.channels.items() if external or not ch.external}

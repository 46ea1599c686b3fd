#!/usr/bin/env python3
"""Cluster file system write path on top of the simulated transport.

A client writes blocks through a pipeline of data nodes. The Name Node chooses the data nodes
and, in mirrored mode, asks the controller to mirror the client's segments. Data nodes store and
forward every HDFS packet and propagate HDFS ACKs upstream. They only use the byte-stream
interface of the transport, so the same application code runs in chain and mirrored mode.
"""
from __future__ import annotations

import dataclasses
import functools
import ipaddress
import struct

import numpy as np

from .controller import Controller, Endpoint, PipelineSpec
from .engine import BLOCK_STREAM, PLACEMENT_STREAM, SimulationError, Simulator
from .fabric import Fabric
from .logger import create_logger, get_level
from .topology import attach_external, build_three_layer, check_topology
from .transport import Host

#: Data transfer port of the data nodes.
DATA_PORT = 50010
#: Replication modes.
CHAIN = 'chain'
MIRRORED = 'mirrored'

# Message types
WRITE_BLOCK = 1
READY = 2
PACKET_ACK = 3

_HEADER = struct.Struct('!BI')          # type, body length
_WRITE_BLOCK = struct.Struct('!QIIBB')  # block id, block size, packet size, position, mirrored
_COUNT = struct.Struct('!B')
_TARGET = struct.Struct('!4sH')         # address, port
_PACKET_ACK = struct.Struct('!Q')       # packet index


@dataclasses.dataclass(frozen=True)
class WriteBlock:
    """Pipeline setup request for the next data node."""
    block_id: int
    block_size: int
    packet_size: int
    #: Pipeline position of the receiver, 1 for D_1.
    position: int
    mirrored: bool
    #: Remaining downstream data nodes as (address, port).
    targets: tuple[tuple[str, int], ...] = ()

    @property
    def n_packets(self):
        """Number of HDFS packets of the block."""
        return -(-self.block_size // self.packet_size)

    def packet_length(self, index):
        """Payload length of an HDFS packet."""
        return min(self.packet_size, self.block_size - index * self.packet_size)

    def downstream(self):
        """Request for the successor."""
        return dataclasses.replace(self, position=self.position + 1, targets=self.targets[1:])

    def encode(self):
        """Wire representation."""
        body = _WRITE_BLOCK.pack(self.block_id, self.block_size, self.packet_size, self.position,
                                 int(self.mirrored))
        body += _COUNT.pack(len(self.targets))
        for ip, port in self.targets:
            body += _TARGET.pack(ipaddress.IPv4Address(ip).packed, port)
        return _HEADER.pack(WRITE_BLOCK, len(body)) + body


@dataclasses.dataclass(frozen=True)
class Ready:
    """Pipeline readiness acknowledgement."""

    def encode(self):
        """Wire representation."""
        return _HEADER.pack(READY, 0)


@dataclasses.dataclass(frozen=True)
class PacketAck:
    """HDFS ACK of one packet."""
    index: int

    def encode(self):
        """Wire representation."""
        return _HEADER.pack(PACKET_ACK, _PACKET_ACK.size) + _PACKET_ACK.pack(self.index)


def decode_message(buf):
    """Decode the first message of a buffer.

    Args:
        buf (bytes | bytearray): Received bytes.

    Returns:
        tuple[WriteBlock | Ready | PacketAck, int] | None: Message and consumed bytes, None if the
        message is incomplete.
    """
    if len(buf) < _HEADER.size:
        return None
    kind, length = _HEADER.unpack_from(buf)
    end = _HEADER.size + length
    if len(buf) < end:
        return None
    body = bytes(buf[_HEADER.size:end])
    if kind == WRITE_BLOCK:
        block_id, block_size, packet_size, position, mirrored = _WRITE_BLOCK.unpack_from(body)
        (count,) = _COUNT.unpack_from(body, _WRITE_BLOCK.size)
        offset = _WRITE_BLOCK.size + _COUNT.size
        targets = []
        for i in range(count):
            ip, port = _TARGET.unpack_from(body, offset + i * _TARGET.size)
            targets.append((str(ipaddress.IPv4Address(ip)), port))
        msg = WriteBlock(block_id, block_size, packet_size, position, bool(mirrored),
                         tuple(targets))
    elif kind == READY:
        msg = Ready()
    elif kind == PACKET_ACK:
        msg = PacketAck(_PACKET_ACK.unpack(body)[0])
    else:
        msg = f'Unknown message type {kind}.'
        raise ValueError(msg)
    return msg, end


@dataclasses.dataclass(frozen=True)
class HdfsPacket:
    """Application-layer unit of a block."""
    block_id: int
    index: int
    payload: bytes


@dataclasses.dataclass(frozen=True)
class Block:
    """Block with deterministic pseudo-random content."""
    id: int
    size: int
    packet_size: int
    #: Global seed, the content is reproducible from (id, seed).
    seed: int = 0

    def __post_init__(self):
        """Validate the sizes."""
        if self.size <= 0 or self.packet_size <= 0:
            msg = (f'Block and packet sizes have to be positive, got {self.size} and '
                   f'{self.packet_size}.')
            raise ValueError(msg)

    @functools.cached_property
    def content(self):
        """Block bytes."""
        rng = np.random.default_rng(np.random.SeedSequence([self.seed, BLOCK_STREAM, self.id]))
        return rng.bytes(self.size)

    @property
    def n_packets(self):
        """Number of HDFS packets."""
        return -(-self.size // self.packet_size)

    def packet(self, index):
        """HDFS packet by index, the last one may be short."""
        if not 0 <= index < self.n_packets:
            msg = f'Packet index {index} is out of range for {self.n_packets} packets.'
            raise IndexError(msg)
        start = index * self.packet_size
        return HdfsPacket(self.id, index, self.content[start:start + self.packet_size])

    def packets(self):
        """All HDFS packets in order."""
        return [self.packet(i) for i in range(self.n_packets)]


class PlacementPolicy:
    """Rack-aware choice of data nodes.

    D_1 and D_2 share a rack, every further data node sits in a rack of its own. The client is never
    chosen.

    Args:
        topology (Topology): Network.
        rng (Generator): Random number generator.

    Keyword Args:
        client_class (str): Location of the client relative to D_1: outside, co-rack, or cross-rack.
        placement (list[int] | None): Explicit data nodes, used for every block.
    """
    def __init__(self, topology, rng, client_class='outside', placement=None):
        """Initialize the PlacementPolicy object."""
        self.topology = topology
        self.rng = rng
        self.client_class = client_class
        self.placement = None if placement is None else [int(n) for n in placement]

    def racks(self, exclude=None):
        """Eligible hosts per edge switch."""
        racks: dict[int, list[int]] = {}
        for host in self.topology.hosts:
            if host != exclude:
                racks.setdefault(self.topology.rack[host], []).append(host)
        return racks

    def pick_client(self):
        """Choose a client host inside the data center."""
        racks = self.racks()
        if self.client_class == 'co-rack':
            # The client's rack has to hold D_1 and D_2 as well
            candidates = [h for hosts in racks.values() if len(hosts) >= 3 for h in hosts]
        else:
            candidates = [h for hosts in racks.values() for h in hosts]
        if not candidates:
            msg = f'No host can serve as a {self.client_class} client.'
            raise ValueError(msg)
        return int(candidates[self.rng.integers(len(candidates))])

    def choose(self, k, client):
        """Choose the data nodes of a pipeline.

        Args:
            k (int): Replication factor.
            client (int): Client node.

        Returns:
            list[int]: Data nodes D_1 to D_k.
        """
        t = self.topology
        if self.placement is not None:
            nodes = self.placement
            if (len(nodes) != k or len(set(nodes)) != k or client in nodes
                    or any(n not in t.rack for n in nodes)):
                msg = f'Explicit placement {nodes} needs {k} distinct hosts other than the client.'
                raise ValueError(msg)
            return list(nodes)

        racks = self.racks(exclude=client)
        client_rack = t.rack.get(client)
        if self.client_class == 'co-rack':
            first = [client_rack] if client_rack in racks else []
        elif self.client_class == 'cross-rack':
            first = [r for r in racks if r != client_rack]
        else:
            first = list(racks)
        need = min(k, 2)
        first = [r for r in first if len(racks[r]) >= need]
        if not first:
            msg = f'No rack holds {need} eligible hosts for a {self.client_class} client.'
            raise ValueError(msg)
        rack = first[self.rng.integers(len(first))]
        nodes = [int(n) for n in self.rng.choice(racks[rack], size=need, replace=False)]
        others = [r for r in racks if r != rack]
        if k - need > len(others):
            msg = f'Replication factor {k} needs {k - need + 1} racks, only {len(racks)} exist.'
            raise ValueError(msg)
        for r in self.rng.choice(others, size=k - need, replace=False):
            nodes.append(int(self.rng.choice(racks[int(r)])))
        return nodes


class NameNode:
    """Block allocation and controller notification.

    Args:
        topology (Topology): Network.
        policy (PlacementPolicy): Data node choice.

    Keyword Args:
        controller (Controller | None): Controller to notify, None disables mirroring.
    """
    def __init__(self, topology, policy, controller=None):
        """Initialize the NameNode object."""
        self.topology = topology
        self.policy = policy
        self.controller = controller
        #: Active pipelines by block id.
        self.pipelines: dict[int, PipelineSpec] = {}
        #: Every allocated pipeline by block id, including released ones.
        self.history: dict[int, PipelineSpec] = {}

    def allocate(self, block_id, k, client, client_port=0):
        """Allocate the data nodes of a block.

        Args:
            block_id (int): Block id, also the pipeline id.
            k (int): Replication factor.
            client (int): Client node.

        Keyword Args:
            client_port (int): Local port of the client's connection, if already known.

        Returns:
            PipelineSpec: Pipeline of the block.
        """
        ip = self.topology.ip
        nodes = self.policy.choose(k, client)
        spec = PipelineSpec(block_id, Endpoint(client, ip[client], client_port),
                            tuple(Endpoint(n, ip[n], DATA_PORT) for n in nodes))
        self.pipelines[block_id] = spec
        self.history[block_id] = spec
        return spec

    def register_port(self, block_id, position, port):
        """Record the local port of a pipeline connection.

        Args:
            block_id (int): Block id.
            position (int): Sender of the connection, 0 for the client.
            port (int): Local port.
        """
        spec = self.pipelines[block_id]
        if position == 0:
            spec = dataclasses.replace(spec, client=dataclasses.replace(spec.client, port=port))
        else:
            datanodes = list(spec.datanodes)
            datanodes[position - 1] = dataclasses.replace(datanodes[position - 1], out_port=port)
            spec = dataclasses.replace(spec, datanodes=tuple(datanodes))
        self.pipelines[block_id] = spec
        self.history[block_id] = spec

    def notify_pipeline(self, block_id):
        """Hand the pipeline information to the controller."""
        if self.controller is not None:
            self.controller.install(self.pipelines[block_id])

    def release(self, block_id):
        """Forget a completed pipeline and remove its mirroring."""
        spec = self.pipelines.pop(block_id, None)
        if spec is not None and self.controller is not None:
            self.controller.teardown(spec)


@dataclasses.dataclass(eq=False)
class PipelineStage:
    """State of one data node for one block."""
    conn_up: object
    conn_down: object = None
    header: WriteBlock | None = None
    #: Received bytes that do not form a complete message or packet yet.
    buf: bytearray = dataclasses.field(default_factory=bytearray)
    down_buf: bytearray = dataclasses.field(default_factory=bytearray)
    #: Number of completely received HDFS packets.
    assembled: int = 0
    persisted: set = dataclasses.field(default_factory=set)
    down_acked: set = dataclasses.field(default_factory=set)
    #: Next HDFS ACK to send upstream.
    next_ack: int = 0


class DataNode:
    """Store-and-forward data node.

    Args:
        sim (Simulator): Simulator.
        host (Host): Transport stack of the node.
        namenode (NameNode): Name Node to notify.
        timing (TimingParams): Processing delays.
    """
    def __init__(self, sim, host, namenode, timing):
        """Initialize the DataNode object."""
        self.sim = sim
        self.host = host
        self.node = host.node
        self.namenode = namenode
        self.timing = timing
        #: Stored block bytes by block id.
        self.replicas: dict[int, bytearray] = {}
        self.stages: dict[int, PipelineStage] = {}
        host.listen(DATA_PORT, self._accept)

    def forward(self, stage, packet):
        """Store, forward, and persist a completely received HDFS packet.

        The transport decides whether the forwarded bytes go on the wire or are virtually
        transmitted.

        Args:
            stage (PipelineStage): Block state.
            packet (HdfsPacket): Packet.
        """
        h = stage.header
        offset = packet.index * h.packet_size
        self.replicas[h.block_id][offset:offset + len(packet.payload)] = packet.payload
        if stage.conn_down is not None:
            stage.conn_down.send(packet.payload)
        self.sim.trace('forward', self.node, h.block_id, packet.index)
        self.sim.schedule(self.timing.persist, self._persisted, stage, packet.index)

    def propagate_ack(self, stage):
        """Send the HDFS ACKs of persisted packets that the successor acknowledged as well.

        Args:
            stage (PipelineStage): Block state.
        """
        h = stage.header
        while (stage.next_ack < h.n_packets and stage.next_ack in stage.persisted
               and (stage.conn_down is None or stage.next_ack in stage.down_acked)):
            stage.conn_up.send(PacketAck(stage.next_ack).encode())
            self.sim.trace('hdfs-ack', self.node, h.block_id, stage.next_ack)
            stage.next_ack += 1

    def _accept(self, conn):
        """Start a stage for a new upstream connection."""
        stage = PipelineStage(conn)
        conn.on_data = functools.partial(self._on_upstream, stage)
        conn.on_peer_close = functools.partial(self._on_close, stage)

    def _on_upstream(self, stage, conn, data):
        """Process bytes from the predecessor."""
        if stage.header is None:
            stage.buf += data
            decoded = decode_message(stage.buf)
            if decoded is None:
                return
            msg, used = decoded
            if not isinstance(msg, WriteBlock):
                msg = f'Data node {self.node} expected WRITE_BLOCK, got {type(msg).__name__}.'
                raise ValueError(msg)
            data = bytes(stage.buf[used:])
            stage.buf.clear()
            self._on_write_block(stage, msg)
        if data:
            self._receive(stage, data)

    def _on_write_block(self, stage, msg):
        """Join a pipeline."""
        stage.header = msg
        self.stages[msg.block_id] = stage
        self.replicas[msg.block_id] = bytearray(msg.block_size)
        ack_delay = self.timing.ack_delay_at(msg.position)
        stage.conn_up.ack_delay = ack_delay
        if msg.mirrored and msg.position >= 2:
            stage.conn_up.mr_enabled = True
        if msg.targets:
            ip, port = msg.targets[0]
            down = self.host.connect(ip, port, functools.partial(self._on_connected, stage))
            down.ack_delay = ack_delay
            down.on_data = functools.partial(self._on_downstream, stage)
            stage.conn_down = down
            self.namenode.register_port(msg.block_id, msg.position, down.local_port)
        else:
            stage.conn_up.send(Ready().encode())

    def _on_connected(self, stage, conn):
        """Pass the setup request on."""
        conn.send(stage.header.downstream().encode())

    def _on_downstream(self, stage, conn, data):
        """Process messages from the successor."""
        stage.down_buf += data
        while (decoded := decode_message(stage.down_buf)) is not None:
            msg, used = decoded
            del stage.down_buf[:used]
            if isinstance(msg, Ready):
                self._on_ready(stage)
            elif isinstance(msg, PacketAck):
                stage.down_acked.add(msg.index)
                self.propagate_ack(stage)

    def _on_ready(self, stage):
        """The rest of the pipeline is ready."""
        if stage.header.position == 1 and stage.header.mirrored:
            # Mirroring has to be in place before the client's next segment
            self.sim.schedule(self.timing.control_latency, self._install_then_ready, stage)
        else:
            stage.conn_up.send(Ready().encode())

    def _install_then_ready(self, stage):
        """Notify the controller through the Name Node, then report readiness."""
        self.namenode.notify_pipeline(stage.header.block_id)
        stage.conn_up.send(Ready().encode())

    def _receive(self, stage, data):
        """Assemble HDFS packets from block bytes."""
        h = stage.header
        stage.buf += data
        while stage.assembled < h.n_packets:
            size = h.packet_length(stage.assembled)
            if len(stage.buf) < size:
                break
            packet = HdfsPacket(h.block_id, stage.assembled, bytes(stage.buf[:size]))
            del stage.buf[:size]
            stage.assembled += 1
            self.sim.schedule(self.timing.packet_processing, self.forward, stage, packet)
        if stage.assembled == h.n_packets and stage.buf:
            msg = f'Data node {self.node} got {len(stage.buf)} bytes beyond block {h.block_id}.'
            raise ValueError(msg)

    def _persisted(self, stage, index):
        """A packet reached stable storage."""
        stage.persisted.add(index)
        self.propagate_ack(stage)

    @staticmethod
    def _on_close(stage, conn):
        """The predecessor finished, close both connections."""
        conn.close()
        if stage.conn_down is not None:
            stage.conn_down.close()


@dataclasses.dataclass(eq=False)
class WriteSession:
    """Client state of one block write."""
    block: Block
    #: Time of the write request.
    requested: int
    spec: PipelineSpec | None = None
    conn: object = None
    #: Time the pipeline reported readiness.
    data_start: int | None = None
    #: Time the last HDFS ACK arrived.
    done: int | None = None
    sent: int = 0
    acked: int = 0
    #: Highest number of outstanding HDFS packets.
    max_outstanding: int = 0
    on_complete: object = None
    buf: bytearray = dataclasses.field(default_factory=bytearray)

    @property
    def outstanding(self):
        """HDFS packets without HDFS ACK."""
        return self.sent - self.acked

    @property
    def data_time(self):
        """Net data transfer time."""
        return self.done - self.data_start

    @property
    def total_time(self):
        """Time from the request to the completion."""
        return self.done - self.requested


class Client:
    """Block writing client.

    Args:
        sim (Simulator): Simulator.
        host (Host): Transport stack of the client.
        namenode (NameNode): Name Node.
        timing (TimingParams): Processing delays.

    Keyword Args:
        k (int): Replication factor.
        mirrored (bool): Request mirrored replication.
        write_max_packets (int): Outstanding HDFS packets.
    """
    def __init__(self, sim, host, namenode, timing, k=3, mirrored=False, write_max_packets=20):
        """Initialize the Client object."""
        self.sim = sim
        self.host = host
        self.node = host.node
        self.namenode = namenode
        self.timing = timing
        self.k = k
        self.mirrored = mirrored
        self.write_max_packets = write_max_packets
        self.sessions: list[WriteSession] = []

    def write_block(self, block, on_complete=None):
        """Request the write of a block.

        Args:
            block (Block): Block.

        Keyword Args:
            on_complete (Callable | None): Called with the session once all replicas hold the block.

        Returns:
            WriteSession: Session, filled while the simulation runs.
        """
        session = WriteSession(block, self.sim.now, on_complete=on_complete)
        self.sessions.append(session)
        # Name Node round trip
        self.sim.schedule(self.timing.control_latency, self._allocate, session)
        return session

    def setup_pipeline(self, session, spec):
        """Connect to D_1 and request the pipeline setup.

        Args:
            session (WriteSession): Session.
            spec (PipelineSpec): Allocated pipeline.

        Returns:
            WriteSession: The session.
        """
        d1 = spec.datanodes[0]
        session.spec = spec
        conn = self.host.connect(d1.ip, d1.port, functools.partial(self._on_connected, session))
        conn.ack_delay = self.timing.ack_delay_at(0)
        conn.on_data = functools.partial(self._on_data, session)
        session.conn = conn
        self.namenode.register_port(spec.pipeline_id, 0, conn.local_port)
        return session

    def _allocate(self, session):
        """Ask the Name Node for data nodes."""
        spec = self.namenode.allocate(session.block.id, self.k, self.node)
        self.sim.trace('allocate', session.block.id, *(d.node for d in spec.datanodes))
        self.setup_pipeline(session, spec)

    def _on_connected(self, session, conn):
        """Send the setup request to D_1."""
        block = session.block
        targets = tuple((d.ip, d.port) for d in session.spec.datanodes[1:])
        conn.send(WriteBlock(block.id, block.size, block.packet_size, 1, self.mirrored,
                             targets).encode())

    def _on_data(self, session, conn, data):
        """Process messages from D_1."""
        session.buf += data
        while (decoded := decode_message(session.buf)) is not None:
            msg, used = decoded
            del session.buf[:used]
            if isinstance(msg, Ready):
                session.data_start = self.sim.now
                self.sim.trace('ready', session.block.id)
                self._pump(session)
            elif isinstance(msg, PacketAck):
                self._on_packet_ack(session, msg.index)

    def _pump(self, session):
        """Write HDFS packets up to the outstanding limit."""
        block = session.block
        while session.sent < block.n_packets and session.outstanding < self.write_max_packets:
            session.conn.send(block.packet(session.sent).payload)
            session.sent += 1
        session.max_outstanding = max(session.max_outstanding, session.outstanding)

    def _on_packet_ack(self, session, index):
        """Process the HDFS ACK of a packet."""
        if index != session.acked:
            msg = f'HDFS ACK {index} arrived out of order, expected {session.acked}.'
            raise ValueError(msg)
        session.acked += 1
        if session.acked == session.block.n_packets:
            self._complete(session)
        else:
            self._pump(session)

    def _complete(self, session):
        """Finish a block."""
        session.done = self.sim.now
        self.sim.trace('complete', session.block.id, session.data_time, session.total_time)
        self.namenode.release(session.block.id)
        session.conn.close()
        if session.on_complete is not None:
            session.on_complete(session)


class Cluster:
    """Complete simulated cluster of one scenario and mode.

    Args:
        cfg (ScenarioConfig): Scenario.
        mode (str): Replication mode, chain or mirrored.

    Keyword Args:
        topology (Topology | None): Prebuilt network, built from the scenario otherwise.
        client (int | None): Client node of a prebuilt network.
        verbose (int | str | None): Level of output.
    """
    def __init__(self, cfg, mode, topology=None, client=None, verbose=None):
        """Initialize the Cluster object."""
        if mode not in (CHAIN, MIRRORED):
            msg = f'Unknown replication mode "{mode}", use "{CHAIN}" or "{MIRRORED}".'
            raise ValueError(msg)
        self.cfg = cfg
        self.mode = mode
        self._log = create_logger(self)
        self.verbose = verbose
        rep = cfg.replication
        self.sim = Simulator(cfg.engine.seed, trace=cfg.engine.trace, verbose=verbose)
        self._log.bind_clock(self.sim)
        timing = cfg.engine.timing

        if topology is None:
            tc = cfg.topology
            topology = build_three_layer(tc.core_count, tc.agg_per_core, tc.racks_per_agg,
                                         tc.hosts_per_rack, tc.link_params)
        policy = PlacementPolicy(topology, self.sim.generator(PLACEMENT_STREAM),
                                 cfg.topology.client, rep.placement)
        if client is None:
            if cfg.topology.client == 'outside':
                client = attach_external(topology, 0, cfg.topology.link_params)
            else:
                client = policy.pick_client()
        check_topology(topology)
        self.topology = topology

        self.fabric = Fabric(self.sim, topology, timing, verbose=verbose)
        self.controller = Controller(self.fabric, verbose=verbose)
        self.namenode = NameNode(topology, policy,
                                 self.controller if mode == MIRRORED else None)
        params = cfg.transport_params
        self.hosts = {}
        for node in (*topology.hosts, client):
            if node not in self.hosts:
                self.hosts[node] = Host(self.sim, self.fabric, node, params, timing.ack_delay,
                                        verbose=verbose)
        self.datanodes = {n: DataNode(self.sim, self.hosts[n], self.namenode, timing)
                          for n in topology.hosts if n != client}
        self.client = Client(self.sim, self.hosts[client], self.namenode, timing, k=rep.k,
                             mirrored=mode == MIRRORED, write_max_packets=rep.write_max_packets)
        self.blocks = [Block(i, rep.block_size, rep.packet_size, cfg.engine.seed)
                       for i in range(rep.blocks)]
        #: Downstream payload bytes on in-datacenter links per block id.
        self.downstream_bytes: dict[int, int] = {}
        self._flows_start = None

    @property
    def verbose(self):
        """Verbosity level."""
        return self._verbose

    @verbose.setter
    def verbose(self, level):
        self._verbose = get_level(level)
        self._log.verbose = self._verbose

    def run(self):
        """Write all blocks one after another.

        Returns:
            list[WriteSession]: Completed sessions.
        """
        self._next_block()
        self.sim.run_until_idle()
        sessions = self.client.sessions
        for session in sessions:
            if session.done is None:
                msg = (f'Block {session.block.id} is incomplete, {session.acked} of '
                       f'{session.block.n_packets} packets were acknowledged.')
                raise SimulationError(msg)
        if len(sessions) != len(self.blocks):
            msg = f'Only {len(sessions)} of {len(self.blocks)} blocks were written.'
            raise SimulationError(msg)
        self._log.info(f'{self.mode} replication of {len(sessions)} block(s) finished at '
                       f'{self.sim.now} ns.')
        return sessions

    def plan(self):
        """Program the mirroring of every block without transferring data.

        Placements and connection ports are taken in the order a run takes them, so the entries
        equal the ones installed by :meth:`run` on a fresh cluster. Every pipeline is released
        again, the simulation clock does not advance.

        Returns:
            list[tuple[int, list]]: Pipeline id and installed entries per block.
        """
        client = self.client.host
        plans = []
        for block in self.blocks:
            spec = self.namenode.allocate(block.id, self.client.k, client.node)
            self.namenode.register_port(block.id, 0, client.next_port())
            for position, d in enumerate(spec.datanodes[:-1], start=1):
                self.namenode.register_port(block.id, position, self.hosts[d.node].next_port())
            plans.append((block.id, self.controller.install(self.namenode.pipelines[block.id])))
            self.namenode.release(block.id)
        return plans

    def audit(self):
        """Compare every replica with its source block.

        Returns:
            dict[int, list[bool]]: Replica equality per block id in pipeline order.
        """
        result = {}
        for session in self.client.sessions:
            block = session.block
            result[block.id] = [bytes(self.datanodes[d.node].replicas.get(block.id, b''))
                                == block.content for d in session.spec.datanodes]
        return result

    def connections(self):
        """Every connection of the run."""
        return [conn for host in self.hosts.values() for conn in host.history]

    def _flow_totals(self):
        """Copy of the per-flow payload counters of all in-datacenter channels."""
        return [ch.flows.copy() for ch in self.fabric.link_counters().values()]

    def _next_block(self, finished=None):
        """Account the finished block and start the next one."""
        if finished is not None:
            spec = finished.spec
            pairs = {(spec.client.ip, spec.datanodes[0].ip)}
            pairs |= {(a.ip, b.ip) for a, b in zip(spec.datanodes, spec.datanodes[1:])}
            total = 0
            for before, after in zip(self._flows_start, self._flow_totals()):
                for key, n in after.items():
                    if key[:2] in pairs:
                        total += n - before.get(key, 0)
            self.downstream_bytes[finished.block.id] = total
        index = len(self.client.sessions)
        if index < len(self.blocks):
            self._flows_start = self._flow_totals()
            self.client.write_block(self.blocks[index], on_complete=self._next_block)

#!/usr/bin/env python3
"""Reliable byte-stream transport with mirrored reception and virtual transmission.

The connection implements cumulative-ACK TCP without congestion control and two additional states:

* MR_RCV: a receiver that accepts mirrored copies of the client's segments (reserved flag 1). It
  translates their sequence numbers into the stream of its pipeline predecessor with a constant
  offset computed at a single synchronization point.
* MR_SND: a sender whose successor already got the data through the mirror. It advances its window
  without emitting segments and stores ACKs that overtake this virtual transmission. Data only goes
  on the wire when the retransmission timer fires, one segment for the first hole of the successor
  and one more for every partial ACK that follows.

Every segment emitted by a mirrored receiver carries the reserved flag 2, which moves its
predecessor into MR_SND.
"""
from __future__ import annotations

import collections
import dataclasses
import enum
import itertools

from .engine import HOST_STREAM
from .logger import create_logger, get_level
from .units import KB, ms, s

#: Header overhead per segment in bytes.
HEADER_BYTES = 40
#: First ephemeral port of every host.
EPHEMERAL_PORT = 40000


class Flags(enum.IntFlag):
    """Control flags."""
    FIN = 0x01
    SYN = 0x02
    RST = 0x04
    ACK = 0x10
    ECE = 0x40
    CWR = 0x80


def flag_str(flags):
    """Compact representation of control flags, e.g., 'SYN|ACK'."""
    return '|'.join(f.name for f in Flags if f in flags) or '-'


class TcpState(enum.Enum):
    """Connection states, TIME_WAIT collapses to CLOSED."""
    CLOSED = 'CLOSED'
    LISTEN = 'LISTEN'
    SYN_SENT = 'SYN_SENT'
    SYN_RCVD = 'SYN_RCVD'
    ESTABLISHED = 'ESTABLISHED'
    MR_SND = 'MR_SND'
    MR_RCV = 'MR_RCV'
    FIN_WAIT_1 = 'FIN_WAIT_1'
    FIN_WAIT_2 = 'FIN_WAIT_2'
    CLOSING = 'CLOSING'
    CLOSE_WAIT = 'CLOSE_WAIT'
    LAST_ACK = 'LAST_ACK'


#: States that put application data on the wire.
_SENDING = {TcpState.ESTABLISHED, TcpState.MR_RCV, TcpState.CLOSE_WAIT}
#: States that accept application data.
_RECEIVING = {TcpState.ESTABLISHED, TcpState.MR_SND, TcpState.MR_RCV, TcpState.FIN_WAIT_1,
              TcpState.FIN_WAIT_2}
#: States that accept writes of the application.
_WRITABLE = {TcpState.SYN_SENT, TcpState.SYN_RCVD, TcpState.ESTABLISHED, TcpState.MR_SND,
             TcpState.MR_RCV, TcpState.CLOSE_WAIT}


@dataclasses.dataclass(frozen=True)
class Segment:
    """Transport segment including its addressing 5-tuple."""
    src_ip: str
    src_port: int
    dst_ip: str
    dst_port: int
    seq: int = 0
    ack: int = 0
    flags: Flags = Flags(0)
    #: 0 for regular segments, 1 for mirrored copies, 2 for segments of mirrored receivers.
    reserved: int = 0
    payload: bytes = b''
    protocol: str = 'tcp'

    def __post_init__(self):
        """Validate the reserved flag."""
        if self.reserved not in (0, 1, 2):
            msg = f'The reserved flag has to be 0, 1, or 2, got {self.reserved}.'
            raise ValueError(msg)

    @property
    def size(self):
        """Wire size in bytes."""
        return HEADER_BYTES + len(self.payload)

    def __str__(self):
        """Short representation for traces."""
        return (f'{self.src_ip}:{self.src_port}>{self.dst_ip}:{self.dst_port} seq={self.seq} '
                f'ack={self.ack} {flag_str(self.flags)} r={self.reserved} len={len(self.payload)}')


@dataclasses.dataclass
class TransportParams:
    """Transport configuration shared by all connections."""
    #: Maximum payload per segment.
    mss: int = 1460
    #: Initial retransmission timeout in nanoseconds.
    rto: int = 200 * ms
    #: Upper limit of the backed-off retransmission timeout.
    rto_max: int = 2 * s
    #: Receive buffer, limits out-of-order bytes and bytes in flight.
    rcv_buffer: int = 20 * 64 * KB
    #: Duplicate ACKs that trigger a fast retransmit.
    dupack_threshold: int = 3
    #: Consecutive timeouts before a connection is aborted.
    max_retries: int = 15

    def __post_init__(self):
        """Validate the parameters."""
        for field in ('mss', 'rto', 'rto_max', 'rcv_buffer', 'dupack_threshold', 'max_retries'):
            if getattr(self, field) <= 0:
                msg = f'{field} has to be positive, got {getattr(self, field)}.'
                raise ValueError(msg)
        if self.rto_max < self.rto:
            msg = f'rto_max ({self.rto_max}) has to be at least rto ({self.rto}).'
            raise ValueError(msg)


@dataclasses.dataclass(frozen=True)
class MirrorSyncRecord:
    """Stream positions at the synchronization point of a mirrored receiver."""
    #: Sequence number of the client's acknowledgement copy.
    n_1: int
    #: Next expected byte from the predecessor at that time.
    n_j: int


def compute_delta(n_j, n_1):
    """Offset that maps client stream positions to predecessor stream positions.

    Args:
        n_j (int): Next expected byte from the predecessor.
        n_1 (int): Client stream position at the same point.

    Returns:
        int: Signed offset n_j - n_1.
    """
    return n_j - n_1


def translate_seq(seq, delta):
    """Map a client stream position into the predecessor stream.

    Args:
        seq (int): Sequence number of a mirrored copy.
        delta (int): Offset from :func:`compute_delta`.

    Returns:
        int: Translated sequence number, negative results mark stray segments.
    """
    return seq + delta


class Connection:
    """One endpoint of a transport connection.

    Args:
        sim (Simulator): Simulator.
        local (tuple[str, int]): Local address and port.
        remote (tuple[str, int]): Remote address and port.
        emit (Callable): Called with every outgoing segment.

    Keyword Args:
        params (TransportParams | None): Transport configuration.
        iss (int): Initial send sequence number.
        ack_delay (int): Delay between a data arrival and its ACK in nanoseconds.
        verbose (int | str | None): Level of output.
    """
    def __init__(self, sim, local, remote, emit, params=None, iss=0, ack_delay=0, verbose=None):
        """Initialize the Connection object."""
        self.sim = sim
        self.local_ip, self.local_port = local
        self.remote_ip, self.remote_port = remote
        self.params = params or TransportParams()
        self.ack_delay = ack_delay
        self.name = f'{self.local_ip}:{self.local_port}>{self.remote_ip}:{self.remote_port}'
        self.state = TcpState.CLOSED
        # Send sequence space
        self.iss = iss
        self.snd_una = iss
        self.snd_nxt = iss
        # Receive sequence space
        self.rcv_nxt = 0
        #: Mirrored copies are only accepted if the application enabled them.
        self.mr_enabled = False
        #: Offset of mirrored copies, set once at the synchronization point.
        self.delta: int | None = None
        self.sync: MirrorSyncRecord | None = None
        #: ACK numbers that arrived before the virtual transmission reached them.
        self.early_acks: list[int] = []
        #: Out-of-order bytes by start sequence number.
        self.ooo: dict[int, bytes] = {}
        self.ooo_bytes = 0
        self.counters: collections.Counter = collections.Counter()
        # Application callbacks
        self.on_established = None
        self.on_data = None
        self.on_peer_close = None
        self.on_closed = None
        self._emit_fn = emit
        self._buf = bytearray()     # unacknowledged and unsent application bytes
        self._buf_seq = iss + 1     # sequence number of self._buf[0]
        self._ready = bytearray()   # in-order bytes waiting for delivery
        self._timer = None
        self._backoff = 0
        self._retries = 0
        self._dupacks = 0
        self._recover = None
        self._fin_pending = False
        self._fin_seq = None
        self._log = create_logger(self, sim=sim)
        self.verbose = verbose

    @classmethod
    def established(cls, sim, local, remote, emit, snd_nxt=0, rcv_nxt=0, **kwargs):
        """Create a connection that already finished its handshake.

        Args:
            sim (Simulator): Simulator.
            local (tuple[str, int]): Local address and port.
            remote (tuple[str, int]): Remote address and port.
            emit (Callable): Called with every outgoing segment.

        Keyword Args:
            snd_nxt (int): Next send sequence number.
            rcv_nxt (int): Next expected receive sequence number.
            **kwargs: Further keyword arguments of the Connection.

        Returns:
            Connection: Connection in ESTABLISHED.
        """
        conn = cls(sim, local, remote, emit, iss=snd_nxt - 1, **kwargs)
        conn._synchronize(snd_nxt, rcv_nxt)
        return conn

    def __repr__(self):
        """Print the connection state."""
        return (f'Connection({self.name}, {self.state.name}, snd_una={self.snd_una}, '
                f'snd_nxt={self.snd_nxt}, rcv_nxt={self.rcv_nxt}, delta={self.delta})')

    @property
    def verbose(self):
        """Verbosity level."""
        return self._verbose

    @verbose.setter
    def verbose(self, level):
        self._verbose = get_level(level)
        self._log.verbose = self._verbose

    @property
    def data_end(self):
        """Sequence number after the last byte written by the application."""
        return self._buf_seq + len(self._buf)

    @property
    def unsent(self):
        """Number of written bytes that are neither sent nor virtually transmitted."""
        return max(self.data_end - self.snd_nxt, 0)

    # ### Application interface ###

    def open(self):
        """Start an active open."""
        if self.state is not TcpState.CLOSED:
            msg = f'Cannot open a connection in {self.state.name}.'
            raise ValueError(msg)
        self.state = TcpState.SYN_SENT
        self._emit(Flags.SYN, self.iss)
        self.snd_nxt = self.iss + 1
        self._arm_timer()

    def accept(self, syn):
        """Answer the SYN of a passive open.

        Args:
            syn (Segment): Received SYN.
        """
        self.rcv_nxt = syn.seq + 1
        self.state = TcpState.SYN_RCVD
        self._emit(Flags.SYN | Flags.ACK, self.iss)
        self.snd_nxt = self.iss + 1
        self._arm_timer()

    def send(self, data):
        """Write application data.

        In MR_SND the data is virtually transmitted, otherwise it is buffered and sent.

        Args:
            data (bytes): Application data.
        """
        if not data:
            return
        if self._fin_pending or self.state not in _WRITABLE:
            msg = f'Cannot write to a connection in {self.state.name}.'
            raise ValueError(msg)
        if self.state is TcpState.MR_SND:
            self.virtual_transmit(data)
            return
        self._buf += data
        self._output()

    def close(self):
        """Start an orderly close after all written data."""
        if self.state in (TcpState.SYN_SENT, TcpState.LISTEN):
            self._finish()
            return
        if self.state not in _WRITABLE or self._fin_pending:
            return
        self._fin_pending = True
        self._output()

    # ### Segment processing ###

    def on_segment(self, seg):
        """Process an arriving segment.

        Args:
            seg (Segment): Received segment.
        """
        self.counters['segments_in'] += 1
        if self.sim.tracing:
            self.sim.trace('tcp', self.name, self.state.name, 'rx', seg.seq, seg.ack,
                           flag_str(seg.flags), seg.reserved, len(seg.payload))
        if seg.reserved == 1:
            self._on_mirrored(seg)
            return
        if self.state is TcpState.CLOSED:
            self.counters['closed_drops'] += 1
            return
        if seg.flags & Flags.RST:
            self._abort('reset by peer')
            return
        if self.state is TcpState.SYN_SENT:
            if seg.flags & Flags.SYN and seg.flags & Flags.ACK and seg.ack == self.iss + 1:
                self._synchronize(self.iss + 1, seg.seq + 1)
                self._send_ack()
                if self.on_established is not None:
                    self.on_established(self)
                self._output()
            return
        if seg.flags & Flags.SYN:
            # The peer missed our handshake answer
            if self.state is TcpState.SYN_RCVD:
                self._emit(Flags.SYN | Flags.ACK, self.iss)
            else:
                self._send_ack()
            return
        if self.state is TcpState.SYN_RCVD:
            if not seg.flags & Flags.ACK or seg.ack != self.iss + 1:
                return
            self._synchronize(self.iss + 1, self.rcv_nxt)
            if self.on_established is not None:
                self.on_established(self)
        if seg.reserved == 2 and self.state is TcpState.ESTABLISHED:
            self._enter_mr_snd()
        if seg.flags & Flags.ACK:
            self._on_ack(seg)
        if seg.payload:
            self._on_data(seg.seq, seg.payload)
        if seg.flags & Flags.FIN:
            self._on_fin(seg.seq + len(seg.payload))

    def apply_sync(self, record):
        """Consume the synchronization record and enter MR_RCV.

        Args:
            record (MirrorSyncRecord): Stream positions at the synchronization point.
        """
        if self.delta is not None:
            msg = f'Connection {self.name} is already synchronized with delta={self.delta}.'
            raise ValueError(msg)
        if self.state is not TcpState.ESTABLISHED:
            msg = f'Cannot synchronize a connection in {self.state.name}.'
            raise ValueError(msg)
        self.sync = record
        self.delta = compute_delta(record.n_j, record.n_1)
        self.state = TcpState.MR_RCV
        self.counters['syncs'] += 1
        self.sim.trace('sync', self.name, record.n_1, record.n_j, self.delta)
        self._log.debug(f'{self.name} entered MR_RCV with delta={self.delta}.')

    def flow_window_check(self, size):
        """Check if the out-of-order store can take more bytes.

        Args:
            size (int): Payload length.

        Returns:
            bool: True if the bytes fit into the receive buffer.
        """
        return self.ooo_bytes + size <= self.params.rcv_buffer

    def virtual_transmit(self, data, seq=None):
        """Advance the send window without emitting segments.

        Args:
            data (bytes): Application data the successor already received through the mirror.

        Keyword Args:
            seq (int | None): Expected start sequence number, has to equal snd_nxt if given.
        """
        if self.state is not TcpState.MR_SND:
            msg = f'Virtual transmission needs MR_SND, the connection is in {self.state.name}.'
            raise ValueError(msg)
        if seq is not None and seq != self.snd_nxt:
            msg = f'Data at {seq} is not contiguous with snd_nxt={self.snd_nxt}.'
            raise ValueError(msg)
        self._buf += data
        self.snd_nxt += len(data)
        self.counters['virtual_bytes'] += len(data)
        self.sim.trace('vtx', self.name, self.snd_una, self.snd_nxt)
        self._after_virtual()

    def on_rto(self):
        """Handle an expired retransmission timer."""
        self.sim.cancel(self._timer)
        self._timer = None
        if self.snd_una >= self.snd_nxt:
            return
        self._retries += 1
        if self._retries > self.params.max_retries:
            self._abort('too many retransmissions')
            return
        self.counters['rto'] += 1
        self._dupacks = 0
        # In MR_SND the successor lost a mirrored copy, partial ACKs below the virtual snd_nxt
        # point at further holes
        self._recover = self.snd_nxt if self.state is TcpState.MR_SND else None
        self._retransmit(self.snd_una)
        self._backoff += 1
        self._arm_timer()

    # ### Internals ###

    def _synchronize(self, snd_nxt, rcv_nxt):
        """Finish the handshake."""
        self.snd_una = self.snd_nxt = snd_nxt
        self._buf_seq = snd_nxt
        self.rcv_nxt = rcv_nxt
        self.state = TcpState.ESTABLISHED
        self._cancel_timer()
        self._backoff = 0
        self._retries = 0

    def _on_mirrored(self, seg):
        """Process a mirrored copy of a client segment."""
        if not self.mr_enabled or self.state is TcpState.CLOSED:
            self.counters['unconfigured_drops'] += 1
            return
        if self.delta is None:
            pure_ack = (seg.flags & Flags.ACK and not seg.payload
                        and not seg.flags & (Flags.SYN | Flags.FIN | Flags.RST))
            if pure_ack and self.state is TcpState.ESTABLISHED:
                self.apply_sync(MirrorSyncRecord(n_1=seg.seq, n_j=self.rcv_nxt))
                return
            self.counters['presync_drops'] += 1
            if seg.payload:
                # The synchronizing ACK got lost, the predecessor keeps sending for real
                self.mr_enabled = False
                self.counters['mr_fallback'] += 1
                self._log.debug(f'{self.name} missed the synchronization, mirroring is disabled.')
            return
        if not seg.payload:
            # Signaling of the client, its flags and ACK numbers concern D_1 only
            self.counters['signaling'] += 1
            return
        seq = translate_seq(seg.seq, self.delta)
        if seq < 0:
            self.counters['stray_drops'] += 1
            return
        self.counters['mirrored_in'] += 1
        self._on_data(seq, seg.payload)

    def _enter_mr_snd(self):
        """Switch a sender into virtual transmission."""
        self.state = TcpState.MR_SND
        self._recover = None
        self._dupacks = 0
        self.counters['mr_snd'] += 1
        self.sim.trace('mr-snd', self.name, self.snd_una, self.snd_nxt)
        self._log.debug(f'{self.name} entered MR_SND.')
        pending = self.data_end - self.snd_nxt
        if pending > 0:
            self.snd_nxt += pending
            self.counters['virtual_bytes'] += pending
            self._after_virtual()

    def _after_virtual(self):
        """Apply stored early ACKs that the virtual transmission caught up with."""
        covered = [a for a in self.early_acks if a <= self.snd_nxt]
        if covered:
            self.early_acks = [a for a in self.early_acks if a > self.snd_nxt]
            self._new_ack(max(covered))
        elif self.snd_una < self.snd_nxt and self._timer is None:
            self._arm_timer()

    def _on_ack(self, seg):
        """Process the ACK field of a segment."""
        ack = seg.ack
        if ack > self.snd_nxt:
            if self.state is TcpState.MR_SND:
                if not self.early_acks or ack > self.early_acks[-1]:
                    self.early_acks.append(ack)
                    self.counters['early_acks'] += 1
                    self.sim.trace('early-ack', self.name, ack, self.snd_nxt)
            else:
                self.counters['ack_beyond'] += 1
            return
        if ack > self.snd_una:
            self._new_ack(ack)
            if self._recover is not None:
                if ack < self._recover:
                    # Partial ACK, the next hole follows directly
                    self._retransmit(self.snd_una)
                else:
                    self._recover = None
            self._output()
        elif (ack == self.snd_una and self.snd_una < self.snd_nxt and not seg.payload
              and not seg.flags & Flags.FIN and self.state is not TcpState.MR_SND):
            self._dupacks += 1
            if self._dupacks == self.params.dupack_threshold and self._recover is None:
                self._recover = self.snd_nxt
                self.counters['fast_retx'] += 1
                self._retransmit(self.snd_una)

    def _new_ack(self, ack):
        """Advance snd_una."""
        acked = min(ack, self.data_end) - self._buf_seq
        if acked > 0:
            del self._buf[:acked]
            self._buf_seq += acked
        self.snd_una = ack
        self._dupacks = 0
        self._backoff = 0
        self._retries = 0
        if self._fin_seq is not None and ack == self._fin_seq + 1:
            self._on_fin_acked()
        if self.state is TcpState.CLOSED:
            return
        if self.snd_una < self.snd_nxt:
            self._cancel_timer()
            self._arm_timer()
        else:
            self._cancel_timer()

    def _on_data(self, seq, payload):
        """Reassemble payload bytes in the local receive stream."""
        if self.state not in _RECEIVING:
            self.counters['late_data'] += 1
            return
        end = seq + len(payload)
        if end <= self.rcv_nxt:
            self.counters['duplicates'] += 1
        elif seq > self.rcv_nxt:
            stored = self.ooo.get(seq)
            if stored is not None and len(stored) >= len(payload):
                self.counters['duplicates'] += 1
            elif self.flow_window_check(len(payload) - (len(stored) if stored else 0)):
                if stored is not None:
                    self.ooo_bytes -= len(stored)
                self.ooo[seq] = payload
                self.ooo_bytes += len(payload)
            else:
                self.counters['window_drops'] += 1
                self._log.debug(f'{self.name} dropped {len(payload)} bytes, the receive buffer '
                                'is full.')
        else:
            self._ready += payload[self.rcv_nxt - seq:]
            self.rcv_nxt = end
            self._drain()
        self.sim.schedule(self.ack_delay, self._ack_event)

    def _drain(self):
        """Move out-of-order bytes that became contiguous."""
        for start in sorted(self.ooo):
            if start > self.rcv_nxt:
                break
            data = self.ooo.pop(start)
            self.ooo_bytes -= len(data)
            end = start + len(data)
            if end > self.rcv_nxt:
                self._ready += data[self.rcv_nxt - start:]
                self.rcv_nxt = end

    def _ack_event(self):
        """Emit the cumulative ACK of a data arrival and deliver in-order bytes."""
        if self.state is TcpState.CLOSED:
            return
        self._send_ack()
        self._deliver()

    def _deliver(self):
        """Hand in-order bytes to the application."""
        if self._ready:
            data = bytes(self._ready)
            self._ready.clear()
            self.counters['delivered_bytes'] += len(data)
            if self.on_data is not None:
                self.on_data(self, data)

    def _on_fin(self, fin_seq):
        """Process a FIN at a given sequence number."""
        if fin_seq == self.rcv_nxt - 1 and self.state in (TcpState.CLOSE_WAIT, TcpState.CLOSING,
                                                          TcpState.LAST_ACK):
            # Retransmitted FIN, our ACK got lost
            self._send_ack()
            return
        if fin_seq != self.rcv_nxt or self.state not in _RECEIVING:
            return
        self.rcv_nxt += 1
        if self.state is TcpState.FIN_WAIT_1:
            self.state = TcpState.CLOSING
        elif self.state is TcpState.FIN_WAIT_2:
            self.state = TcpState.CLOSED
        else:
            self.state = TcpState.CLOSE_WAIT
        self._send_ack()
        self._deliver()
        if self.on_peer_close is not None:
            self.on_peer_close(self)
        if self.state is TcpState.CLOSED:
            self._finish()

    def _on_fin_acked(self):
        """Process the ACK of our FIN."""
        if self.state is TcpState.FIN_WAIT_1:
            self.state = TcpState.FIN_WAIT_2
        elif self.state in (TcpState.CLOSING, TcpState.LAST_ACK):
            self._finish()

    def _output(self):
        """Send buffered data within the window, then a pending FIN."""
        if self.state in _SENDING:
            end = self.data_end
            while self.snd_nxt < end:
                room = self.params.rcv_buffer - (self.snd_nxt - self.snd_una)
                if room <= 0:
                    break
                size = min(self.params.mss, end - self.snd_nxt, room)
                self._emit_data(self.snd_nxt, size)
                self.snd_nxt += size
        if (self._fin_pending and self._fin_seq is None and self.snd_nxt == self.data_end
                and self.state in (*_SENDING, TcpState.MR_SND)):
            self._fin_seq = self.snd_nxt
            self.snd_nxt += 1
            self.state = TcpState.LAST_ACK if self.state is TcpState.CLOSE_WAIT \
                else TcpState.FIN_WAIT_1
            self._emit(Flags.FIN | Flags.ACK, self._fin_seq)
        if self.snd_una < self.snd_nxt and self._timer is None:
            self._arm_timer()

    def _retransmit(self, seq):
        """Resend the segment starting at a sequence number."""
        if self.state is TcpState.SYN_SENT:
            self._emit(Flags.SYN, self.iss)
        elif self.state is TcpState.SYN_RCVD:
            self._emit(Flags.SYN | Flags.ACK, self.iss)
        elif seq < self.data_end:
            self._emit_data(seq, min(self.params.mss, self.data_end - seq), retransmission=True)
        elif self._fin_seq is not None and seq == self._fin_seq:
            self._emit(Flags.FIN | Flags.ACK, self._fin_seq)

    def _emit_data(self, seq, size, retransmission=False):
        """Emit a data segment from the send buffer."""
        offset = seq - self._buf_seq
        self._emit(Flags.ACK, seq, bytes(self._buf[offset:offset + size]))
        if retransmission:
            self.counters['retx'] += 1
            self.counters['retx_bytes'] += size

    def _send_ack(self):
        """Emit a pure cumulative ACK."""
        self._emit(Flags.ACK, self.snd_nxt)

    def _emit(self, flags, seq, payload=b''):
        """Build and emit a segment."""
        seg = Segment(self.local_ip, self.local_port, self.remote_ip, self.remote_port, seq=seq,
                      ack=self.rcv_nxt if flags & Flags.ACK else 0, flags=flags,
                      reserved=0 if self.delta is None else 2, payload=payload)
        self.counters['segments_out'] += 1
        if self.sim.tracing:
            self.sim.trace('tcp', self.name, self.state.name, 'tx', seg.seq, seg.ack,
                           flag_str(seg.flags), seg.reserved, len(seg.payload))
        self._emit_fn(seg)

    def _arm_timer(self):
        """Start the retransmission timer if it is not running."""
        if self._timer is None:
            rto = min(self.params.rto * 2**self._backoff, self.params.rto_max)
            self._timer = self.sim.schedule(rto, self.on_rto)

    def _cancel_timer(self):
        """Stop the retransmission timer."""
        self.sim.cancel(self._timer)
        self._timer = None

    def _abort(self, reason):
        """Close without handshake."""
        self.counters['aborts'] += 1
        if self.state in _WRITABLE:
            self._log.warning(f'{self.name} aborted in {self.state.name}: {reason}.')
        else:
            self._log.debug(f'{self.name} aborted in {self.state.name}: {reason}.')
        self._finish()

    def _finish(self):
        """Enter CLOSED and release the connection."""
        self._cancel_timer()
        self.state = TcpState.CLOSED
        self.sim.trace('closed', self.name)
        if self.on_closed is not None:
            self.on_closed(self)


class Host:
    """Transport stack of one end host.

    Args:
        sim (Simulator): Simulator.
        fabric (Fabric): Network the host is attached to.
        node (int): Node id of the host.

    Keyword Args:
        params (TransportParams | None): Transport configuration.
        ack_delay (int): ACK delay of new connections in nanoseconds.
        verbose (int | str | None): Level of output.
    """
    def __init__(self, sim, fabric, node, params=None, ack_delay=0, verbose=None):
        """Initialize the Host object."""
        self.sim = sim
        self.fabric = fabric
        self.node = node
        self.ip = fabric.topology.ip[node]
        self.params = params or TransportParams()
        self.ack_delay = ack_delay
        #: Connections by (local port, remote address, remote port).
        self.connections: dict[tuple[int, str, int], Connection] = {}
        #: Accept callbacks by listening port.
        self.listeners: dict = {}
        #: Every connection ever created, in creation order.
        self.history: list[Connection] = []
        self.diagnostics: collections.Counter = collections.Counter()
        self._ports = itertools.count(EPHEMERAL_PORT)
        self._rng = sim.generator(HOST_STREAM, node)
        self._verbose = verbose
        fabric.attach(node, self.receive)

    def listen(self, port, on_accept):
        """Accept connections on a port.

        Args:
            port (int): Local port.
            on_accept (Callable): Called with every new established connection.
        """
        self.listeners[port] = on_accept

    def connect(self, remote_ip, remote_port, on_established=None):
        """Open a connection from an ephemeral port.

        Args:
            remote_ip (str): Remote address.
            remote_port (int): Remote port.

        Keyword Args:
            on_established (Callable | None): Called once the handshake finished.

        Returns:
            Connection: New connection in SYN_SENT.
        """
        conn = self._new_connection(self.next_port(), remote_ip, remote_port)
        conn.on_established = on_established
        conn.open()
        return conn

    def next_port(self):
        """Take the next ephemeral port, ports are handed out in increasing order."""
        return next(self._ports)

    def receive(self, frame):
        """Demultiplex an arriving segment.

        Args:
            frame (Segment): Received segment.
        """
        if frame.dst_ip != self.ip:
            self.diagnostics['misaddressed'] += 1
            return
        conn = self.connections.get((frame.dst_port, frame.src_ip, frame.src_port))
        if conn is not None:
            conn.on_segment(frame)
            return
        if (frame.flags & Flags.SYN and not frame.flags & Flags.ACK and frame.reserved == 0
                and frame.dst_port in self.listeners):
            conn = self._new_connection(frame.dst_port, frame.src_ip, frame.src_port)
            conn.on_established = self.listeners[frame.dst_port]
            conn.accept(frame)
            return
        self.diagnostics['no_connection'] += 1
        # Reset stale peers, but never answer mirrored copies
        if frame.reserved == 0 and not frame.flags & Flags.RST:
            rst = Segment(self.ip, frame.dst_port, frame.src_ip, frame.src_port, seq=frame.ack,
                          flags=Flags.RST)
            self.fabric.send(self.node, rst)

    def _new_connection(self, local_port, remote_ip, remote_port):
        """Create and register a connection."""
        iss = int(self._rng.integers(0, 2**32))
        conn = Connection(self.sim, (self.ip, local_port), (remote_ip, remote_port),
                          self._transmit, self.params, iss=iss, ack_delay=self.ack_delay,
                          verbose=self._verbose)
        conn.on_closed = self._release
        self.connections[local_port, remote_ip, remote_port] = conn
        self.history.append(conn)
        return conn

    def _release(self, conn):
        """Remove a closed connection from the demultiplexer."""
        key = (conn.local_port, conn.remote_ip, conn.remote_port)
        if self.connections.get(key) is conn:
            del self.connections[key]

    def _transmit(self, seg):
        """Put a segment on the host's link."""
        self.fabric.send(self.node, seg)

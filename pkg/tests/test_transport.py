#!/usr/bin/env python3
"""Test the transport connection, mirrored reception, and virtual transmission."""
import pytest

from mirrorsim.engine import Simulator
from mirrorsim.fabric import Fabric
from mirrorsim.topology import build_three_layer
from mirrorsim.transport import (
    compute_delta,
    Connection,
    Flags,
    flag_str,
    Host,
    MirrorSyncRecord,
    Segment,
    TcpState,
    translate_seq,
    TransportParams,
)
from mirrorsim.units import ms

A = ('10.0.0.1', 40000)
B = ('10.0.0.2', 50010)
data = bytes(range(256)) * 40


class Wire:
    """Deliver segments between connections after a fixed delay, dropping selected ones."""
    def __init__(self, delay=10_000):
        """Initialize the Wire object."""
        self.sim = Simulator()
        self.delay = delay
        self.ends = {}
        self.segments = []
        self.drop = set()

    def connect(self, local, remote, snd_nxt, rcv_nxt, **kwargs):
        """Create an established connection on the wire."""
        conn = Connection.established(self.sim, local, remote, self.emit, snd_nxt=snd_nxt,
                                      rcv_nxt=rcv_nxt, **kwargs)
        self.ends[local] = conn
        return conn

    def emit(self, seg):
        """Transmit a segment."""
        index = len(self.segments)
        self.segments.append(seg)
        if index not in self.drop:
            self.sim.schedule(self.delay, self.ends[seg.dst_ip, seg.dst_port].on_segment, seg)


def make_pair(**kwargs):
    """Create a connected pair, a sends from 1000 and b from 7000."""
    wire = Wire()
    a = wire.connect(A, B, 1000, 7000, **kwargs)
    b = wire.connect(B, A, 7000, 1000, **kwargs)
    received = bytearray()
    b.on_data = lambda conn, chunk: received.extend(chunk)
    return wire, a, b, received


def mirrored(seq, payload=b'', flags=Flags.ACK):
    """Mirrored copy of a client segment after its header rewrite."""
    return Segment(*A, *B, seq=seq, ack=5, flags=flags, reserved=1, payload=payload)


def test_segment():
    """Check segment sizes and flag validation."""
    seg = Segment(*A, *B, payload=b'abc')
    assert seg.size == 43
    assert 'len=3' in str(seg)
    with pytest.raises(ValueError):
        Segment(*A, *B, reserved=3)
    assert flag_str(Flags.SYN | Flags.ACK) == 'SYN|ACK'
    assert flag_str(Flags(0)) == '-'


def test_params():
    """Check the validation of transport parameters."""
    with pytest.raises(ValueError):
        TransportParams(mss=0)
    with pytest.raises(ValueError):
        TransportParams(rto=300 * ms, rto_max=100 * ms)


@pytest.mark.parametrize(('n_1', 'n_j', 'ref'), [(1000, 900, -100), (1000, 1300, 300),
                                                 (2**32 - 10, 5, 15 - 2**32)])
def test_delta(n_1, n_j, ref):
    """Check offsets and the translation of client positions."""
    delta = compute_delta(n_j, n_1)
    assert delta == ref
    assert translate_seq(n_1, delta) == n_j
    assert translate_seq(n_1 + 1460, delta) == n_j + 1460


def test_transfer():
    """Check an in-order transfer."""
    wire, a, b, received = make_pair()
    a.send(data)
    assert a.unsent == 0
    wire.sim.run_until_idle()
    assert bytes(received) == data
    assert a.snd_una == a.snd_nxt == 1000 + len(data)
    assert b.rcv_nxt == a.snd_nxt
    assert a.counters['retx'] == 0
    assert all(seg.reserved == 0 for seg in wire.segments)


def test_fast_retransmit():
    """Check recovery of a lost segment by duplicate ACKs."""
    wire, a, b, received = make_pair()
    wire.drop = {0}
    a.send(data)
    wire.sim.run_until_idle()
    assert bytes(received) == data
    assert a.counters['fast_retx'] == 1
    assert a.counters['retx'] == 1
    assert a.counters['rto'] == 0
    assert b.counters['delivered_bytes'] == len(data)
    assert not b.ooo
    assert b.ooo_bytes == 0


def test_rto():
    """Check recovery of a lost segment by the retransmission timer."""
    wire, a, _, received = make_pair()
    wire.drop = {0}
    a.send(b'x' * 100)
    wire.sim.run_until_idle()
    assert bytes(received) == b'x' * 100
    assert a.counters['rto'] == 1
    assert wire.sim.now >= 200 * ms
    assert a.snd_una == a.snd_nxt


def test_abort():
    """Check that connections give up after too many timeouts."""
    params = TransportParams(max_retries=2)
    wire, a, _, _ = make_pair(params=params)
    wire.drop = set(range(10))
    a.send(b'x')
    wire.sim.run_until_idle()
    assert a.state is TcpState.CLOSED
    assert a.counters['aborts'] == 1
    assert a.counters['rto'] == 2


def test_close():
    """Check the orderly close of both ends."""
    wire, a, b, _ = make_pair()
    closed = []
    a.on_closed = closed.append
    b.on_closed = closed.append
    b.on_peer_close = lambda conn: conn.close()
    a.send(b'bye')
    a.close()
    with pytest.raises(ValueError):
        a.send(b'more')
    wire.sim.run_until_idle()
    assert a.state is TcpState.CLOSED
    assert b.state is TcpState.CLOSED
    assert closed == [a, b]
    assert a.snd_una == a.snd_nxt == 1000 + 3 + 1


def test_window():
    """Check the receive buffer limit of the out-of-order store."""
    _, _, b, _ = make_pair(params=TransportParams(rcv_buffer=1000))
    assert b.flow_window_check(1000)
    assert not b.flow_window_check(1001)
    b.on_segment(Segment(*A, *B, seq=1100, flags=Flags.ACK, payload=bytes(600)))
    b.on_segment(Segment(*A, *B, seq=1700, flags=Flags.ACK, payload=bytes(600)))
    assert b.ooo_bytes == 600
    assert b.counters['window_drops'] == 1


def test_sync():
    """Check the synchronization on the first mirrored ACK."""
    wire, _, b, received = make_pair()
    b.mr_enabled = True
    b.on_segment(mirrored(300))
    assert b.state is TcpState.MR_RCV
    assert b.sync == MirrorSyncRecord(n_1=300, n_j=1000)
    assert b.delta == 700
    b.on_segment(mirrored(300, b'm' * 100))
    b.on_segment(mirrored(300, b'm' * 100))
    wire.sim.run_until_idle()
    assert bytes(received) == b'm' * 100
    assert b.rcv_nxt == 1100
    assert b.counters['mirrored_in'] == 2
    assert b.counters['duplicates'] == 1
    assert wire.segments
    assert all(seg.reserved == 2 for seg in wire.segments if seg.src_ip == B[0])
    with pytest.raises(ValueError):
        b.apply_sync(MirrorSyncRecord(1, 1))


def test_mirrored_drops():
    """Check mirrored copies that cannot be used."""
    _, _, b, _ = make_pair()
    b.on_segment(mirrored(300))
    assert b.counters['unconfigured_drops'] == 1
    assert b.state is TcpState.ESTABLISHED

    b.mr_enabled = True
    b.on_segment(mirrored(5000))
    b.on_segment(mirrored(5000))
    assert b.counters['signaling'] == 1
    b.on_segment(mirrored(100, b'x'))
    assert b.counters['stray_drops'] == 1
    assert b.rcv_nxt == 1000


def test_fallback():
    """Check that a mirrored payload before the synchronization disables mirroring."""
    _, _, b, _ = make_pair()
    b.mr_enabled = True
    b.on_segment(mirrored(300, b'x' * 10))
    assert b.counters['presync_drops'] == 1
    assert b.counters['mr_fallback'] == 1
    assert not b.mr_enabled
    assert b.delta is None
    assert b.rcv_nxt == 1000


def test_mirrored_reset():
    """Check that reset flags of mirrored copies never reset mirrored receivers."""
    _, _, b, _ = make_pair()
    b.mr_enabled = True
    b.on_segment(mirrored(300, flags=Flags.RST | Flags.ACK))
    assert b.counters['presync_drops'] == 1
    assert b.delta is None
    assert b.state is TcpState.ESTABLISHED
    b.on_segment(mirrored(300))
    b.on_segment(mirrored(300, flags=Flags.RST))
    assert b.state is TcpState.MR_RCV
    assert b.counters['signaling'] == 1
    assert b.counters['aborts'] == 0
    b.on_segment(mirrored(300, b'm' * 100))
    assert b.rcv_nxt == 1100


def test_sync_state():
    """Check that only established connections can synchronize."""
    sim = Simulator()
    conn = Connection(sim, A, B, lambda seg: None)
    with pytest.raises(ValueError):
        conn.apply_sync(MirrorSyncRecord(1, 1))
    conn.mr_enabled = True
    conn.on_segment(mirrored(300))
    assert conn.counters['unconfigured_drops'] == 1


def test_early_ack():
    """Check that overtaking ACKs are stored and applied by the virtual transmission."""
    wire, a, b, _ = make_pair()
    b.mr_enabled = True
    b.on_segment(mirrored(300))
    b.on_segment(mirrored(300, b'm' * 100))
    wire.sim.run_until_idle()
    assert a.state is TcpState.MR_SND
    assert a.early_acks == [1100]
    assert a.counters['early_acks'] == 1
    a.send(b'm' * 100)
    assert a.early_acks == []
    assert a.snd_una == a.snd_nxt == 1100
    assert a.counters['virtual_bytes'] == 100
    wire.sim.run_until_idle()
    assert not any(seg.payload for seg in wire.segments if seg.src_ip == A[0])


def test_virtual_transmit():
    """Check virtual transmission and the real retransmission after a timeout."""
    wire, a, b, received = make_pair()
    with pytest.raises(ValueError):
        a.virtual_transmit(b'x')
    a.on_segment(Segment(*B, *A, seq=7000, ack=1000, flags=Flags.ACK, reserved=2))
    assert a.state is TcpState.MR_SND
    a.send(data[:3000])
    assert a.snd_nxt == 4000
    assert a.snd_una == 1000
    assert not wire.segments
    with pytest.raises(ValueError):
        a.virtual_transmit(b'x', seq=1000)
    # The successor never got the data, so the timer puts it on the wire
    wire.sim.run_until_idle()
    assert bytes(received) == data[:3000]
    assert a.counters['rto'] == 1
    assert a.counters['retx'] == 3
    assert a.counters['retx_bytes'] == 3000
    assert a.snd_una == a.snd_nxt == 4000
    assert a.state is TcpState.MR_SND
    assert b.state is TcpState.ESTABLISHED


def test_fill_hole():
    """Check that a timeout in MR_SND only resends the segment the successor is missing."""
    wire, a, b, received = make_pair()
    a.on_segment(Segment(*B, *A, seq=7000, ack=1000, flags=Flags.ACK, reserved=2))
    a.send(data[:3000])
    # The successor got everything behind the first segment
    b.on_segment(Segment(*A, *B, seq=2460, flags=Flags.ACK, payload=data[1460:3000]))
    wire.sim.run_until_idle()
    assert bytes(received) == data[:3000]
    assert a.counters['rto'] == 1
    assert a.counters['retx'] == 1
    assert a.counters['retx_bytes'] == 1460
    assert [seg.seq for seg in wire.segments if seg.src_ip == A[0] and seg.payload] == [1000]
    assert a.snd_una == a.snd_nxt == 4000
    assert a.state is TcpState.MR_SND


def test_pending_virtual():
    """Check that unsent bytes are virtually transmitted when entering MR_SND."""
    wire, a, _, _ = make_pair(params=TransportParams(rcv_buffer=1460))
    a.send(data[:4000])
    assert a.unsent == 4000 - 1460
    a.on_segment(Segment(*B, *A, seq=7000, ack=1000, flags=Flags.ACK, reserved=2))
    assert a.unsent == 0
    assert a.counters['virtual_bytes'] == 4000 - 1460


def make_hosts(seed=0):
    """Create two hosts in one rack."""
    sim = Simulator(seed=seed)
    fabric = Fabric(sim, build_three_layer(1, 1, 1, 2))
    return sim, fabric, Host(sim, fabric, 3), Host(sim, fabric, 4)


def test_handshake():
    """Check the handshake and a transfer between two hosts."""
    sim, _, h0, h1 = make_hosts()
    accepted = []
    established = []
    h1.listen(80, accepted.append)
    conn = h0.connect('10.0.0.2', 80, established.append)
    assert conn.state is TcpState.SYN_SENT
    sim.run_until_idle()
    assert established == [conn]
    assert conn.state is TcpState.ESTABLISHED
    assert accepted[0].state is TcpState.ESTABLISHED
    assert accepted[0].remote_port == conn.local_port == 40000
    got = bytearray()
    accepted[0].on_data = lambda c, chunk: got.extend(chunk)
    conn.send(data)
    sim.run_until_idle()
    assert bytes(got) == data


def test_reset():
    """Check that connections to closed ports are reset."""
    sim, _, h0, h1 = make_hosts()
    conn = h0.connect('10.0.0.2', 81)
    sim.run_until_idle()
    assert conn.state is TcpState.CLOSED
    assert conn.counters['aborts'] == 1
    assert h1.diagnostics['no_connection'] == 1
    assert not h0.connections
    assert h0.history == [conn]


def test_no_reset_for_copies():
    """Check that mirrored copies without a connection are dropped silently."""
    sim, fabric, h0, h1 = make_hosts()
    h1.receive(Segment('10.0.0.1', 1, '10.0.0.2', 2, flags=Flags.ACK, reserved=1))
    h1.receive(Segment('10.0.0.1', 1, '10.0.0.9', 2))
    sim.run_until_idle()
    assert h1.diagnostics['no_connection'] == 1
    assert h1.diagnostics['misaddressed'] == 1
    assert not fabric.emitted


def test_isn():
    """Check that initial sequence numbers depend on the seed."""
    isn = [make_hosts(seed)[2].connect('10.0.0.2', 80).iss for seed in (1, 1, 2)]
    assert isn[0] == isn[1]
    assert isn[0] != isn[2]


if __name__ == '__main__':
    import inspect
    import pathlib
    file_path = pathlib.Path(inspect.stack()[0][1])
    pytest.main(file_path)

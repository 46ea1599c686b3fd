#!/usr/bin/env python3
"""Test the block write path in chain and mirrored mode."""
import numpy as np
import pytest

from mirrorsim.replication import (
    Block,
    CHAIN,
    Cluster,
    decode_message,
    MIRRORED,
    NameNode,
    PacketAck,
    PlacementPolicy,
    Ready,
    WriteBlock,
)
from mirrorsim.scenario import ScenarioConfig
from mirrorsim.topology import build_three_layer, example_topology
from mirrorsim.transport import TcpState
from mirrorsim.units import KB, MB, ms

ex = example_topology()
cfg = ScenarioConfig().replace(replication__block_size=MB, replication__placement=[5, 6, 8])


def run_example(mode, **changes):
    """Write one block over the example network."""
    net = example_topology()
    cluster = Cluster(cfg.replace(**changes), mode, topology=net.topology,
                      client=net.nodes['client'])
    return cluster, cluster.run()


def test_messages():
    """Check message framing."""
    msg = WriteBlock(7, MB, 64 * KB, 1, True, (('10.0.0.2', 50010), ('10.0.1.1', 50010)))
    buf = msg.encode() + Ready().encode() + PacketAck(3).encode()
    decoded, used = decode_message(buf)
    assert decoded == msg
    assert decode_message(buf[used:used + 2]) is None
    assert decode_message(buf[used:])[0] == Ready()
    assert decode_message(PacketAck(3).encode()) == (PacketAck(3), 13)
    with pytest.raises(ValueError):
        decode_message(b'\x09\x00\x00\x00\x00')


def test_write_block():
    """Check the setup request of the successor."""
    msg = WriteBlock(0, 100, 30, 1, False, (('10.0.0.2', 50010), ('10.0.1.1', 50010)))
    assert msg.n_packets == 4
    assert [msg.packet_length(i) for i in range(4)] == [30, 30, 30, 10]
    down = msg.downstream()
    assert down.position == 2
    assert down.targets == (('10.0.1.1', 50010),)
    assert down.downstream().targets == ()


def test_block():
    """Check packetization and deterministic content."""
    block = Block(0, 100, 30, seed=1)
    assert [len(p.payload) for p in block.packets()] == [30, 30, 30, 10]
    assert b''.join(p.payload for p in block.packets()) == block.content
    assert Block(0, 100, 30, seed=1).content == block.content
    assert Block(1, 100, 30, seed=1).content != block.content
    assert Block(0, 128 * MB, 64 * KB).n_packets == 2048
    with pytest.raises(IndexError):
        block.packet(4)
    with pytest.raises(ValueError):
        Block(0, 0, 30)


def test_placement():
    """Check the rack-aware placement."""
    net = build_three_layer(2, 2, 2, 2)
    policy = PlacementPolicy(net, np.random.default_rng(0))
    for k in (1, 2, 5):
        nodes = policy.choose(k, client=-1)
        assert len(set(nodes)) == k
        racks = [net.rack[n] for n in nodes]
        if k >= 2:
            assert racks[0] == racks[1]
            assert len(set(racks[1:])) == k - 1
    with pytest.raises(ValueError):
        PlacementPolicy(build_three_layer(1, 1, 1, 3), np.random.default_rng(0)).choose(3, -1)


@pytest.mark.parametrize('client_class', ['co-rack', 'cross-rack'])
def test_placement_client(client_class):
    """Check the placement relative to a client inside the data center."""
    net = build_three_layer(1, 2, 2, 4)
    policy = PlacementPolicy(net, np.random.default_rng(3), client_class)
    client = policy.pick_client()
    nodes = policy.choose(3, client)
    assert client not in nodes
    assert (net.rack[client] == net.rack[nodes[0]]) == (client_class == 'co-rack')


def test_explicit_placement():
    """Check explicit placements."""
    policy = PlacementPolicy(ex.topology, None, placement=[5, 6, 8])
    assert policy.choose(3, ex.nodes['client']) == [5, 6, 8]
    for placement in ([5, 5, 8], [5, 6], [5, 6, 3]):
        with pytest.raises(ValueError):
            PlacementPolicy(ex.topology, None, placement=placement).choose(3, ex.nodes['client'])


def test_namenode():
    """Check port registration and release."""
    policy = PlacementPolicy(ex.topology, None, placement=[5, 6, 8])
    namenode = NameNode(ex.topology, policy)
    spec = namenode.allocate(4, 3, ex.nodes['client'])
    assert [d.node for d in spec.datanodes] == [5, 6, 8]
    namenode.register_port(4, 0, 40001)
    namenode.register_port(4, 2, 40002)
    spec = namenode.pipelines[4]
    assert spec.client.port == 40001
    assert [d.out_port for d in spec.datanodes] == [None, 40002, None]
    namenode.release(4)
    namenode.release(4)
    assert not namenode.pipelines
    assert namenode.history[4] == spec


def test_invalid_mode():
    """Check that unknown modes are rejected."""
    with pytest.raises(ValueError):
        Cluster(cfg, 'broadcast')


@pytest.mark.parametrize('mode', [CHAIN, MIRRORED])
def test_write(mode):
    """Check a block write in both modes."""
    cluster, sessions = run_example(mode)
    session = sessions[0]
    assert session.acked == 16
    assert session.data_time > 0
    assert session.total_time > session.data_time
    assert session.max_outstanding <= cfg.replication.write_max_packets
    assert cluster.audit() == {0: [True, True, True]}
    assert not cluster.namenode.pipelines
    assert not cluster.controller.installed
    assert all(c.state is TcpState.CLOSED for c in cluster.connections())


def test_chain_traffic():
    """Check that the chain copies the block hop by hop."""
    cluster, _ = run_example(CHAIN)
    setup = WriteBlock(0, MB, 64 * KB, 2, False, (('10.0.1.1', 50010),)).encode()
    uplink = cluster.fabric.channels[ex.hops[5]]
    assert uplink.flows['10.0.0.1', '10.0.0.2', 0] == MB + len(setup)
    assert not any(c.counters['syncs'] for c in cluster.connections())
    assert not any(c.counters['mr_snd'] for c in cluster.connections())


def test_mirrored_traffic():
    """Check that data nodes only exchange setup messages in mirrored mode."""
    cluster, _ = run_example(MIRRORED)
    setup = WriteBlock(0, MB, 64 * KB, 2, True, (('10.0.1.1', 50010),)).encode()
    assert cluster.fabric.channels[ex.hops[5]].flows['10.0.0.1', '10.0.0.2', 0] == len(setup)
    setup = WriteBlock(0, MB, 64 * KB, 3, True).encode()
    assert cluster.fabric.channels[ex.hops[7]].flows['10.0.0.2', '10.0.1.1', 0] == len(setup)
    # The copies arrive with the rewritten headers
    assert cluster.fabric.channels[ex.hops[6]].flows['10.0.0.1', '10.0.0.2', 1] >= MB
    assert cluster.fabric.channels[ex.hops[12]].flows['10.0.0.2', '10.0.1.1', 1] >= MB
    # D_1 is reached by the client itself, D_2 and D_3 synchronize once
    stages = {n: cluster.datanodes[n].stages[0] for n in (5, 6, 8)}
    assert stages[5].conn_up.counters['syncs'] == 0
    assert stages[6].conn_up.counters['syncs'] == 1
    assert stages[8].conn_up.counters['syncs'] == 1
    assert stages[5].conn_down.counters['mr_snd'] == 1
    assert stages[6].conn_down.counters['mr_snd'] == 1
    assert stages[5].conn_down.counters['retx'] == 0


def test_data_time():
    """Check that mirroring shortens the write."""
    chain = run_example(CHAIN)[1][0]
    mirrored = run_example(MIRRORED)[1][0]
    assert mirrored.data_time < chain.data_time
    assert mirrored.total_time < chain.total_time


def test_hdfs_ack_order():
    """Check that HDFS ACKs travel from the last data node to the client."""
    cluster, _ = run_example(MIRRORED, engine__trace=True)
    times = {}
    for line in cluster.sim.lines:
        fields = line.split()
        if fields[1] == 'hdfs-ack':
            times[int(fields[2]), int(fields[4])] = int(fields[0])
    assert len(times) == 3 * 16
    for index in range(16):
        assert times[8, index] <= times[6, index] <= times[5, index]


def test_single_replica():
    """Check that a single replica never installs mirroring."""
    cluster, sessions = run_example(MIRRORED, replication__k=1, replication__placement=[5],
                                    engine__trace=True)
    assert sessions[0].acked == 16
    assert cluster.audit() == {0: [True]}
    assert not any(' install ' in line for line in cluster.sim.lines)


def test_teardown():
    """Check that a write finishes when the mirroring disappears mid-block."""
    net = example_topology()
    cluster = Cluster(cfg, MIRRORED, topology=net.topology, client=net.nodes['client'])
    cluster.sim.schedule(6 * ms, cluster.controller.teardown_all)
    sessions = cluster.run()
    assert sessions[0].acked == 16
    assert cluster.audit() == {0: [True, True, True]}
    assert cluster.datanodes[5].stages[0].conn_down.counters['rto'] >= 1
    assert cluster.datanodes[5].stages[0].conn_down.counters['retx_bytes'] > 0


def test_plan():
    """Check that planned mirroring entries equal the entries of a run."""
    changes = {'replication__block_size': 256 * KB, 'replication__blocks': 2}
    clusters = []
    for _ in range(2):
        net = example_topology()
        clusters.append(Cluster(cfg.replace(**changes), MIRRORED, topology=net.topology,
                                client=net.nodes['client']))
    planner, runner = clusters
    plans = planner.plan()
    runner.run()
    assert [pipeline_id for pipeline_id, _ in plans] == [0, 1]
    assert all(installs for _, installs in plans)
    assert planner.namenode.history == runner.namenode.history
    assert planner.sim.now == 0
    assert not planner.controller.installed
    assert not planner.namenode.pipelines


def test_blocks():
    """Check sequential blocks and their traffic accounting."""
    cluster, sessions = run_example(CHAIN, replication__block_size=256 * KB,
                                    replication__blocks=3)
    assert [s.block.id for s in sessions] == [0, 1, 2]
    assert all(s.requested >= p.done for p, s in zip(sessions, sessions[1:]))
    assert all(all(ok) for ok in cluster.audit().values())
    # 11 links per block, plus the setup messages
    for n in cluster.downstream_bytes.values():
        assert 11 * 256 * KB < n < 11 * 256 * KB + 1000


if __name__ == '__main__':
    import inspect
    import pathlib
    file_path = pathlib.Path(inspect.stack()[0][1])
    pytest.main(file_path)

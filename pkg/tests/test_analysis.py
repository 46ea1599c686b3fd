#!/usr/bin/env python3
"""Test the traffic model and simulation metrics."""
import math

from numpy.testing import assert_allclose
import pytest

from mirrorsim.analysis import (
    CLIENT_CLASSES,
    collect_metrics,
    eliminated_links,
    enumerate_average_savings,
    enumerate_cases,
    l_total,
    placement_case,
    PlacementCase,
    run_scenario,
    RunMetrics,
    saving_ratio,
    savings_table,
    sweep,
)
from mirrorsim.engine import SimulationError
from mirrorsim.replication import Cluster
from mirrorsim.scenario import ScenarioConfig
from mirrorsim.topology import build_three_layer, example_topology, shortest_path
from mirrorsim.units import KB

ex = example_topology()
small = ScenarioConfig().replace(replication__block_size=256 * KB)


def test_example_case():
    """Check the link counts of the example pipeline."""
    case = placement_case(ex.topology, ex.nodes['client'], [5, 6, 8])
    assert case == PlacementCase(((0, 3), (1, 1), (3, 3)), 'outside')
    assert l_total(case) == 11
    assert eliminated_links(case) == 4
    assert_allclose(saving_ratio(case), 4 / 11)


def test_case_classes():
    """Check the client classes of concrete placements."""
    t = build_three_layer(1, 2, 2, 4)
    # Hosts 7-10 share a rack, 11-14 the next one
    assert placement_case(t, 8, [7, 9, 11]).client_class == 'co-rack'
    assert placement_case(t, 11, [7, 9, 15]).client_class == 'cross-rack'
    case = placement_case(t, 7, [7, 8, 11])
    assert case.client_class == 'co-server'
    assert case.hops[0] == (0, 0)
    # The first hop of a co-server client does not count
    assert eliminated_links(case) == case.hops[2][0]


@pytest.mark.parametrize('nodes', [[7, 8, 11], [7, 15, 19], [12, 19, 22, 8]])
def test_case_paths(nodes):
    """Check the link counts against path lengths."""
    t = build_three_layer(1, 2, 2, 4)
    case = placement_case(t, 10, nodes)
    members = [10, *nodes]
    assert l_total(case) == sum(len(shortest_path(t, a, b)) for a, b in zip(members, members[1:]))


def test_single_replica():
    """Check single replicas, where mirroring has nothing to save."""
    assert math.isnan(saving_ratio(PlacementCase(((0, 0),), 'co-server')))
    assert saving_ratio(PlacementCase(((0, 3),), 'outside')) == 0
    assert saving_ratio(PlacementCase(((1, 1),), 'co-rack')) == 0


def test_invalid_case():
    """Check the validation of placement cases."""
    with pytest.raises(ValueError):
        PlacementCase(())
    with pytest.raises(ValueError):
        PlacementCase(((0, 4),))
    with pytest.raises(ValueError):
        PlacementCase(((0, 3),), 'roaming')
    with pytest.raises(ValueError):
        enumerate_cases(0, 'outside')


@pytest.mark.parametrize(('client_class', 'symmetric', 'ref'), [('outside', True, 9),
                                                                ('outside', False, 81),
                                                                ('co-server', True, 9),
                                                                ('cross-rack', True, 18),
                                                                ('cross-rack', False, 162)])
def test_enumerate_cases(client_class, symmetric, ref):
    """Check the number of enumerated cases for three replicas."""
    cases = enumerate_cases(3, client_class, symmetric)
    assert len(cases) == ref
    assert len(set(cases)) == ref
    assert all(case.k == 3 for case in cases)


@pytest.mark.parametrize(('k', 'client_class', 'ref'), [(3, 'outside', 0.356947),
                                                        (3, 'co-server', 0.25),
                                                        (3, 'co-rack', 0.393915),
                                                        (2, 'outside', 0.273016),
                                                        (2, 'co-server', 0),
                                                        (2, 'co-rack', 0.319444),
                                                        (2, 'cross-rack', 0.215278),
                                                        (2, None, 0.201934)])
def test_average_savings(k, client_class, ref):
    """Check average saving ratios."""
    assert_allclose(enumerate_average_savings(k, client_class), ref, atol=1e-5)


def test_savings_band():
    """Check the pooled saving ratios over replication factors."""
    pooled = [enumerate_average_savings(k) for k in range(2, 6)]
    assert 0.15 <= pooled[1] <= 0.40
    assert all(a < b for a, b in zip(pooled, pooled[1:]))
    rows = savings_table(range(2, 6))
    assert [row['k'] for row in rows] == [2, 3, 4, 5]
    assert_allclose([row['pooled'] for row in rows], pooled)


@pytest.mark.parametrize('symmetric', [True, False])
def test_ratio_range(symmetric):
    """Check that every saving ratio lies in [0, 1)."""
    for client_class in CLIENT_CLASSES:
        for case in enumerate_cases(3, client_class, symmetric):
            assert 0 <= saving_ratio(case) < 1


@pytest.mark.parametrize('client_class', ['outside', 'co-rack', 'cross-rack'])
def test_monotonic(client_class):
    """Check that another replica never lowers the saving ratio."""
    for case in enumerate_cases(3, client_class):
        for n in (1, 2, 3):
            longer = PlacementCase((*case.hops, (n, n)), client_class)
            assert saving_ratio(longer) >= saving_ratio(case)


def test_row():
    """Check CSV rows."""
    m = RunMetrics('s', 'chain', 3, 10, 20, 3.14159, 400, 0, 0, math.nan)
    assert m.row() == ['s', 'chain', 3, 10, 20, '3.1416', 400, 0, 0, 'NA']
    m.saving_ratio = 4 / 11
    assert m.row()[-1] == '0.3636'


def test_run_scenario():
    """Check the measured traffic against the traffic model."""
    results = run_scenario(small)
    assert list(results) == ['chain', 'mirrored']
    chain, mirrored = results['chain'], results['mirrored']
    assert chain.placements == mirrored.placements
    assert chain.replicas_ok
    assert mirrored.replicas_ok
    assert mirrored.data_time < chain.data_time
    assert chain.early_acks == 0
    assert mirrored.early_acks > 0
    assert chain.retx == mirrored.retx == 0
    measured = 1 - mirrored.payload_link_traversals / chain.payload_link_traversals
    assert_allclose(measured, chain.saving_ratio, atol=0.02)
    # D_3 sits below the aggregation switch of D_1 (9 links) or below the other one (11 links)
    assert min(abs(chain.payload_link_traversals - n) for n in (9, 11)) < 0.01


def test_diverging_replicas(monkeypatch):
    """Check that diverging replicas fail the run."""
    monkeypatch.setattr(Cluster, 'audit', lambda self: {0: [True, False, True]})
    with pytest.raises(SimulationError):
        run_scenario(small, modes=('chain',))


def test_collect_metrics():
    """Check the metrics of a single run."""
    cluster = Cluster(small.replace(replication__blocks=2), 'chain')
    metrics = collect_metrics(cluster, cluster.run())
    assert metrics.k == 3
    assert len(metrics.placements) == 2
    assert metrics.total_time > metrics.data_time > 0
    assert metrics.ack_bytes > 0
    assert metrics.max_outstanding == 4
    assert sum(metrics.link_payload.values()) > 2 * 256 * KB
    assert all(metrics.link_total[key] >= n for key, n in metrics.link_payload.items())


@pytest.mark.slow
def test_sweep():
    """Check the order of sweep results."""
    metrics = sweep(small, ks=range(2, 4), workers=1)
    assert [(m.k, m.mode) for m in metrics] == [(2, 'chain'), (2, 'mirrored'), (3, 'chain'),
                                                (3, 'mirrored')]
    assert [m.scenario for m in metrics[::2]] == ['default-k2', 'default-k3']
    assert all(m.replicas_ok for m in metrics)


if __name__ == '__main__':
    import inspect
    import pathlib
    file_path = pathlib.Path(inspect.stack()[0][1])
    pytest.main(file_path)

import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from p2pcap import (
    build_flow_network,
    extract_allocation,
    max_flow,
    min_cut,
    overlay_from_edges,
    sra_decide,
)

from helpers import fig1_graph, lp_max_allocation, random_overlay


def assert_flow_is_feasible(network, result):
    """Capacity bounds on every arc plus conservation at interior vertices."""
    balance = [0] * network.num_vertices
    for i in range(network.num_arcs):
        f = result.flows[i]
        assert 0 <= f <= network.capacities[i]
        balance[network.tails[i]] -= f
        balance[network.heads[i]] += f
    for v in range(network.num_vertices):
        if v not in (network.source, network.sink):
            assert balance[v] == 0
    assert balance[network.source] == -result.value
    assert balance[network.sink] == result.value


# ---------------------------------------------------------------------------
# network construction


def test_transform_fig1_structure(fig1):
    net = build_flow_network(fig1)
    assert net.num_vertices == 10
    n = 4
    source_caps = [net.capacities[i] for i in range(n)]
    cross = [
        (net.tails[i], net.heads[i], net.capacities[i])
        for i in range(net.num_arcs)
        if 1 <= net.tails[i] <= n and n + 1 <= net.heads[i] <= 2 * n
    ]
    sink_caps = [net.capacities[-n + i] for i in range(n)]
    assert source_caps == [15, 12, 8, 13]
    assert sink_caps == [10, 17, 10, 5]
    assert len(cross) == 8  # two directed arcs per undirected edge
    assert all(c == fig1.total_demand() for _, _, c in cross)


def test_transform_single_node():
    g = overlay_from_edges(1, [], capacity=[5], demand=[2])
    net = build_flow_network(g)
    assert net.num_arcs == 2
    assert net.num_vertices == 4


def test_transform_triangle_cross_arcs():
    g = overlay_from_edges(3, [(0, 1), (1, 2), (0, 2)])
    net = build_flow_network(g)
    n = 3
    cross = [i for i in range(net.num_arcs) if 1 <= net.tails[i] <= n]
    assert len(cross) == 6


def test_cross_arc_graph_is_bipartite(fig1):
    net = build_flow_network(fig1)
    n = 4
    for i in range(net.num_arcs):
        t, h = net.tails[i], net.heads[i]
        if t != net.source and h != net.sink:
            assert 1 <= t <= n and n + 1 <= h <= 2 * n


# ---------------------------------------------------------------------------
# max flow


def test_fig1_value_frozen(fig1):
    # expected value computed independently: the transportation LP oracle
    # yields 42.0 on this instance, equal to the total demand
    result = max_flow(build_flow_network(fig1))
    assert result.value == 42


def test_fig1_agrees_with_lp_oracle(fig1):
    assert max_flow(build_flow_network(fig1)).value == pytest.approx(
        lp_max_allocation(fig1)
    )


def test_zero_capacity_zero_flow():
    g = overlay_from_edges(3, [(0, 1), (1, 2)], capacity=[0, 0, 0], demand=[1, 1, 1])
    assert max_flow(build_flow_network(g)).value == 0


def test_two_node_mutual_service():
    g = overlay_from_edges(2, [(0, 1)], capacity=[5, 5], demand=[3, 3])
    net = build_flow_network(g)
    result = max_flow(net)
    assert result.value == 6
    alloc = extract_allocation(net, result)
    assert alloc.weight(0, 1) == 3 and alloc.weight(1, 0) == 3


def test_star_with_weak_center():
    # center 0 can serve one unit; three leaves demand one each and cannot
    # serve; only one leaf demand is met
    g = overlay_from_edges(
        4, [(0, 1), (0, 2), (0, 3)], capacity=[1, 0, 0, 0], demand=[0, 1, 1, 1]
    )
    outcome = sra_decide(g)
    assert not outcome.satisfiable
    assert outcome.flow_value == 1
    assert outcome.ratio == pytest.approx(1 / 3)


def test_zero_demand_trivially_satisfiable():
    g = overlay_from_edges(3, [(0, 1), (1, 2)], capacity=[1, 1, 1], demand=[0, 0, 0])
    outcome = sra_decide(g)
    assert outcome.satisfiable and outcome.ratio == 1.0
    assert outcome.allocation.weights == {}


def test_fig1_decide(fig1):
    outcome = sra_decide(fig1)
    assert outcome.satisfiable
    assert outcome.ratio == 1.0
    assert outcome.allocation.total() == 42
    for v in range(4):
        assert outcome.allocation.received(v) == fig1.demand[v]


# ---------------------------------------------------------------------------
# oracle battery: every 4-node topology, then random 5/6-node instances


def _all_four_node_graphs():
    pairs = list(itertools.combinations(range(4), 2))
    for mask in range(1 << len(pairs)):
        yield [pairs[i] for i in range(len(pairs)) if mask >> i & 1]


def test_exhaustive_small_battery_against_lp():
    rng = np.random.default_rng(0)
    for edges in _all_four_node_graphs():
        caps = [int(x) for x in rng.integers(0, 5, 4)]
        dems = [int(x) for x in rng.integers(0, 5, 4)]
        g = overlay_from_edges(4, edges, caps, dems)
        value = max_flow(build_flow_network(g)).value
        assert value == pytest.approx(lp_max_allocation(g)), (edges, caps, dems)


@pytest.mark.parametrize("n", [5, 6])
def test_random_small_battery_against_lp(n):
    for seed in range(60):
        g = random_overlay(seed, n, kappa=2, cap_low=0, cap_high=4, demand=0)
        rng = np.random.default_rng(seed + 999)
        g = overlay_from_edges(
            g.n,
            list(g.edges()),
            g.capacity,
            [int(x) for x in rng.integers(0, 5, n)],
        )
        value = max_flow(build_flow_network(g)).value
        assert value == pytest.approx(lp_max_allocation(g))


# ---------------------------------------------------------------------------
# structural invariants


@settings(max_examples=60, deadline=None)
@given(seed=st.integers(0, 10**6), n=st.integers(2, 25))
def test_flow_invariants(seed, n):
    g = random_overlay(seed, n, kappa=min(3, n - 1), cap_low=0, cap_high=5, demand=3)
    net = build_flow_network(g)
    result = max_flow(net)
    assert_flow_is_feasible(net, result)
    cut_value, reachable = min_cut(net, result)
    assert cut_value == result.value
    assert net.source in reachable and net.sink not in reachable
    alloc = extract_allocation(net, result)
    assert alloc.total() == result.value
    for u in range(g.n):
        assert alloc.sent(u) <= g.capacity[u]
        assert alloc.received(u) <= g.demand[u]
    outcome = sra_decide(g)
    assert 0.0 <= outcome.ratio <= 1.0
    assert outcome.satisfiable == (result.value == g.total_demand())

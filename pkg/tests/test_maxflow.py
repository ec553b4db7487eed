"""Min-cut solver checked against exhaustive cut enumeration."""

import itertools

import numpy as np
import pytest

from thermofoot.errors import PreconditionError
from thermofoot.maxflow import FlowNetwork, solve_max_flow


def brute_force_min_cut(num_nodes, source, sink, tails, heads, caps, rcaps):
    """Enumerate every source/sink partition and return the cheapest cut."""
    others = [v for v in range(num_nodes) if v not in (source, sink)]
    best = np.inf
    arcs = []
    for t, h, c, rc in zip(tails, heads, caps, rcaps):
        arcs.append((t, h, c))
        arcs.append((h, t, rc))
    for r in range(len(others) + 1):
        for extra in itertools.combinations(others, r):
            side = {source, *extra}
            cut = sum(c for t, h, c in arcs if t in side and h not in side)
            best = min(best, cut)
    return best


def random_graph(rng, num_nodes):
    m = rng.integers(0, 2 * num_nodes + 4)
    tails = rng.integers(0, num_nodes, size=m)
    heads = rng.integers(0, num_nodes, size=m)
    caps = rng.integers(0, 20, size=m).astype(float)
    rcaps = np.where(rng.random(m) < 0.5, rng.integers(0, 20, size=m), 0).astype(float)
    return tails, heads, caps, rcaps


def test_trivial_two_node():
    net = FlowNetwork(2)
    net.add_edge(0, 1, 7.0)
    res = net.solve(0, 1)
    assert res.value == 7.0
    assert res.source_side.tolist() == [True, False]


def test_series_bottleneck():
    net = FlowNetwork(3)
    net.add_edge(0, 1, 5.0)
    net.add_edge(1, 2, 3.0)
    res = net.solve(0, 2)
    assert res.value == 3.0


def test_disconnected_sink():
    net = FlowNetwork(3)
    net.add_edge(0, 1, 5.0)
    res = net.solve(0, 2)
    assert res.value == 0.0
    assert res.source_side.tolist() == [True, True, False]


def test_classic_diamond():
    # two disjoint paths plus a cross edge; known max flow 23
    net = FlowNetwork(4)
    net.add_edge(0, 1, 10)
    net.add_edge(0, 2, 13)
    net.add_edge(1, 2, 4)
    net.add_edge(1, 3, 14)
    net.add_edge(2, 3, 9)
    res = net.solve(0, 3)
    assert res.value == 19.0


def test_undirected_edge_via_reverse_capacity():
    net = FlowNetwork(3)
    net.add_edge(0, 1, 4.0, rcap=4.0)
    net.add_edge(2, 1, 6.0, rcap=6.0)
    res = net.solve(0, 2)
    assert res.value == 4.0


def test_matches_brute_force_on_random_graphs():
    rng = np.random.default_rng(1234)
    for trial in range(200):
        n = int(rng.integers(2, 13))
        tails, heads, caps, rcaps = random_graph(rng, n)
        source, sink = 0, n - 1
        res = solve_max_flow(n, source, sink, tails, heads, caps, rcaps)
        expected = brute_force_min_cut(n, source, sink, tails, heads, caps, rcaps)
        # integer capacities keep every residual update exact in float64
        assert res.value == expected, f"trial {trial}: {res.value} != {expected}"


def test_reported_cut_matches_flow_value():
    rng = np.random.default_rng(99)
    for _ in range(50):
        n = int(rng.integers(2, 13))
        tails, heads, caps, rcaps = random_graph(rng, n)
        res = solve_max_flow(n, 0, n - 1, tails, heads, caps, rcaps)
        side = res.source_side
        assert side[0] and not side[n - 1]
        cut = 0.0
        for t, h, c, rc in zip(tails, heads, caps, rcaps):
            if side[t] and not side[h]:
                cut += c
            if side[h] and not side[t]:
                cut += rc
        assert cut == res.value


def test_determinism():
    rng = np.random.default_rng(7)
    tails, heads, caps, rcaps = random_graph(rng, 10)
    a = solve_max_flow(10, 0, 9, tails, heads, caps, rcaps)
    b = solve_max_flow(10, 0, 9, tails, heads, caps, rcaps)
    assert a.value == b.value
    assert np.array_equal(a.source_side, b.source_side)


def test_rejects_bad_inputs():
    with pytest.raises(PreconditionError):
        solve_max_flow(3, 0, 0, [0], [1], [1.0])
    with pytest.raises(PreconditionError):
        solve_max_flow(3, 0, 5, [0], [1], [1.0])
    with pytest.raises(PreconditionError):
        solve_max_flow(3, 0, 2, [0], [1], [-1.0])
    with pytest.raises(PreconditionError):
        FlowNetwork(1)

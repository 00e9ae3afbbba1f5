import heapq
import math

import numpy as np
import pytest

from semsearch.simcore import SimConfig, WorldBelief, sense
from semsearch.topo import (Frontier, TopoConfig, TopoGraph, Unreachable,
                            coverage_gain, distance_matrix, expand_graph,
                            frontiers, seed_boundary_nodes, shortest_path,
                            update_gains)

from conftest import ascii_scenario, two_room_scenario


def open_room(side=33, start=(16, 16)):
    art = "\n".join("c" * side for _ in range(side))
    return ascii_scenario(art, start=start, target=("bed", 0),
                          objects=[(1, 1, "bed")])


def sensed_belief(s, pos, r_m=8.0):
    b = WorldBelief(s)
    sense(s, b, pos, SimConfig(sensing_range=r_m))
    return b


def dijkstra_oracle(adj, src):
    dist = {src: 0.0}
    pq = [(0.0, src)]
    while pq:
        d, u = heapq.heappop(pq)
        if d > dist.get(u, math.inf):
            continue
        for v, w in adj[u].items():
            nd = d + w
            if nd < dist.get(v, math.inf):
                dist[v] = nd
                heapq.heappush(pq, (nd, v))
    return dist


def random_graph(rng, n=30):
    g = TopoGraph()
    pts = rng.integers(0, 60, size=(n, 2))
    for (y, x) in pts:
        g.add_node((int(y), int(x)))
    for i in range(1, n):
        j = int(rng.integers(0, i))
        g.add_edge(i, j, cell_size=1.0)   # spanning tree keeps it connected
    for _ in range(2 * n):
        a, b = int(rng.integers(0, n)), int(rng.integers(0, n))
        if a != b:
            g.add_edge(a, b, cell_size=1.0)
    return g


def test_expand_noop_without_new_cells():
    s = open_room()
    b = sensed_belief(s, (16, 16))
    g = TopoGraph()
    g.add_node((16, 16))
    rng = np.random.default_rng(0)
    cfg = TopoConfig()
    assert expand_graph(b, g, rng, cfg, []) == []
    assert len(g) == 1


def test_expand_covers_visible_room():
    s = open_room()
    b = sensed_belief(s, (16, 16), r_m=12.0)  # 48 cells: whole room visible
    g = TopoGraph()
    g.add_node((16, 16))
    rng = np.random.default_rng(0)
    cfg = TopoConfig()
    new_free = [(y, x) for (y, x) in zip(*np.nonzero(b.occupancy == 1))]
    expand_graph(b, g, rng, cfg, new_free)
    pos = g.pos_array()
    free = np.argwhere(b.occupancy == 1)
    d = np.hypot(free[:, 0, None] - pos[None, :, 0],
                 free[:, 1, None] - pos[None, :, 1]).min(axis=1)
    assert d.max() <= 2 * cfg.d_sep


def test_no_edge_through_wall():
    from semsearch.raycast import segment_clear
    s = two_room_scenario(start=(3, 2))
    b = sensed_belief(s, (3, 2), r_m=8.0)
    # a straight segment across the dividing wall is not collision-free
    assert not segment_clear(b.occupancy != 1, 1, 5, 1, 9)
    # but the segment through the doorway row is
    assert segment_clear(b.occupancy != 1, 3, 5, 3, 9)


def test_coverage_gain_examples():
    s = open_room()
    b = sensed_belief(s, (16, 16), r_m=12.0)
    cfg = TopoConfig(gain_range=12.0 / s.cell_size)
    # everything visible from the center is explored: zero gain there
    assert coverage_gain(b, (16, 16), TopoConfig(gain_range=8.0)) == 0.0
    # near the corner, unexplored cells beyond the sensed disc remain
    b2 = sensed_belief(s, (16, 16), r_m=2.0)
    assert coverage_gain(b2, (16, 16), TopoConfig(gain_range=14.0)) > 0


def test_shortest_path_trivial_cases():
    g = TopoGraph()
    a = g.add_node((0, 0))
    b = g.add_node((0, 5))
    g.add_edge(a, b, cell_size=1.0)
    assert shortest_path(g, a, a, 1.0) == ([a], 0.0)
    path, length = shortest_path(g, a, b, 1.0)
    assert path == [a, b]
    assert length == pytest.approx(5.0)


def test_shortest_path_matches_dijkstra_oracle():
    rng = np.random.default_rng(42)
    for trial in range(10):
        g = random_graph(rng)
        oracle = dijkstra_oracle(g.adj, 0)
        for goal in range(1, len(g)):
            _, length = shortest_path(g, 0, goal, 1.0)
            assert length == pytest.approx(oracle[goal], abs=1e-9)


def test_shortest_path_unreachable():
    g = TopoGraph()
    g.add_node((0, 0))
    g.add_node((9, 9))
    with pytest.raises(Unreachable):
        shortest_path(g, 0, 1, 1.0)


def test_distance_matrix_properties():
    rng = np.random.default_rng(7)
    g = random_graph(rng)
    ids = [0, 3, 7, 11, 19]
    D = distance_matrix(g, ids)
    assert D.shape == (5, 5)
    assert np.allclose(D, D.T)
    assert np.allclose(np.diag(D), 0.0)
    # triangle inequality of the graph metric
    for i in range(5):
        for j in range(5):
            for k in range(5):
                assert D[i, j] <= D[i, k] + D[k, j] + 1e-9
    # entries equal pairwise shortest_path results
    for i, a in enumerate(ids):
        for j, b in enumerate(ids):
            _, length = shortest_path(g, a, b, 1.0)
            assert D[i, j] == pytest.approx(length, abs=1e-9)


def test_distance_matrix_single():
    g = TopoGraph()
    g.add_node((0, 0))
    assert np.array_equal(distance_matrix(g, [0]), np.zeros((1, 1)))


def test_boundary_seed_guarantees_frontier():
    s = open_room()
    b = sensed_belief(s, (16, 16), r_m=2.0)   # small known disc
    g = TopoGraph()
    g.add_node((16, 16))
    cfg = TopoConfig(gain_range=14.0)
    added = seed_boundary_nodes(b, g, cfg)
    assert added
    update_gains(b, g, cfg, [], added)
    assert g.frontier_ids(cfg.gain_threshold)


def test_frontiers_have_defined_regions():
    s = two_room_scenario(start=(3, 2))
    b = sensed_belief(s, (3, 2), r_m=1.5)
    g = TopoGraph()
    g.add_node((3, 2))
    rng = np.random.default_rng(0)
    cfg = TopoConfig(d_sep=2.0, gain_range=6.0)
    new_free = [(y, x) for (y, x) in zip(*np.nonzero(b.occupancy == 1))]
    added = expand_graph(b, g, rng, cfg, new_free)
    update_gains(b, g, cfg, [], [0] + added)
    for f in frontiers(b, g, cfg):
        assert f.region_id >= 0
        assert f.coverage_gain > cfg.gain_threshold

from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from evsiting import hexgrid as hg
from evsiting import roadgraph as rg
from evsiting.roadgraph import EdgeRecord, RoadGraph
from evsiting.synthetic import grid_graph, random_geometric_graph
from oracles import naive_betweenness

SPEC = hg.GridSpec()


def ring_box(x0, x1, y0, y1):
    lat, lon = hg.unproject(np.array([x0, x1, x1, x0]), np.array([y0, y0, y1, y1]), SPEC)
    return list(zip(lat.tolist(), lon.tolist()))


def record(zone, a, b, xa, ya, xb, yb):
    la, lo = hg.unproject(xa, ya, SPEC)
    lb, lob = hg.unproject(xb, yb, SPEC)
    return EdgeRecord(zone, a, b, float(la), float(lo), float(lb), float(lob))


def path(n):
    return RoadGraph.from_xy([(i, 0) for i in range(n)], [(i, i + 1) for i in range(n - 1)])


def test_four_cycle_inside():
    pts = {"a": (0, 0), "b": (100, 0), "c": (100, 100), "d": (0, 100)}
    recs = [record("z", u, v, *pts[u], *pts[v]) for u, v in
            [("a", "b"), ("b", "c"), ("c", "d"), ("d", "a")]]
    g = rg.build_graph(ring_box(-50, 150, -50, 150), recs, SPEC, "z")
    assert g.n_nodes == 4
    assert g.degree.tolist() == [2, 2, 2, 2]


def test_boundary_crossing_edge_clipped():
    recs = [record("z", "a", "b", 0, 0, 100, 0), record("z", "b", "out", 100, 0, 900, 0)]
    g = rg.build_graph(ring_box(-50, 150, -50, 50), recs, SPEC, "z")
    assert g.node_ids == ["a", "b"]
    assert g.edges.tolist() == [[0, 1]]


def test_duplicates_and_self_loops_dropped():
    recs = [record("z", "a", "b", 0, 0, 100, 0), record("z", "b", "a", 100, 0, 0, 0),
            record("z", "a", "a", 0, 0, 0, 0)]
    g = rg.build_graph(ring_box(-50, 150, -50, 50), recs, SPEC, "z")
    assert len(g.edges) == 1
    assert g.lengths[0] == pytest.approx(100.0, abs=1e-3)


def test_empty_zone_rejected():
    with pytest.raises(ValueError):
        rg.build_graph(ring_box(0, 1, 0, 1), [], SPEC, "z")


def test_grid_degrees():
    g = grid_graph(5, 5)
    deg = g.degree.reshape(5, 5)
    assert {deg[0, 0], deg[0, 4], deg[4, 0], deg[4, 4]} == {2}
    assert set(deg[0, 1:4]) | set(deg[1:4, 0]) == {3}
    assert set(deg[1:4, 1:4].ravel()) == {4}


def test_path_values():
    g = path(4)
    assert rg.raw_betweenness(g).tolist() == [0, 2, 2, 0]
    assert rg.betweenness(g).tolist() == [0, 1, 1, 0]


def test_star_centre_max():
    g = RoadGraph.from_xy(np.zeros((5, 2)) + np.arange(5)[:, None], [(0, k) for k in range(1, 5)])
    b = rg.betweenness(g)
    assert b[0] == 1.0 and b[1:].tolist() == [0, 0, 0, 0]


def test_complete_graph_zero():
    g = RoadGraph.from_xy(np.eye(4)[:, :2], [(i, j) for i in range(4) for j in range(i + 1, 4)])
    assert rg.raw_betweenness(g).tolist() == [0, 0, 0, 0]
    assert rg.betweenness(g).tolist() == [0, 0, 0, 0]


def test_single_node_and_disconnected():
    g = RoadGraph.from_xy([(0, 0)], [])
    assert rg.betweenness(g).tolist() == [0.0]
    # two separate paths: no path crosses between components
    g = RoadGraph.from_xy(np.arange(6)[:, None] * [1, 0], [(0, 1), (1, 2), (3, 4), (4, 5)])
    assert rg.raw_betweenness(g).tolist() == [0, 1, 0, 0, 1, 0]


@given(st.integers(2, 14), st.data())
def test_brandes_matches_naive_counting(n, data):
    pairs = [(i, j) for i in range(n) for j in range(i + 1, n)]
    chosen = data.draw(st.lists(st.sampled_from(pairs), unique=True, max_size=len(pairs)))
    g = RoadGraph.from_xy(np.arange(n)[:, None] * [1.0, 0.0], chosen)
    assert rg.raw_betweenness(g, exact=True) == naive_betweenness(n, chosen)


def test_weighted_prefers_short_route():
    # square with one long side: weighted paths avoid it
    xy = [(0, 0), (1, 0), (1, 1), (0, 1)]
    g = RoadGraph.from_xy(xy, [(0, 1), (1, 2), (2, 3), (0, 3)])
    g.lengths[:] = [10.0 if tuple(e) == (0, 3) else 1.0 for e in g.edges.tolist()]
    g = RoadGraph(g.zone_id, g.node_ids, g.lat, g.lon, g.x, g.y, g.edges, g.lengths)
    w = rg.raw_betweenness(g, weighted=True, exact=True)
    # effectively the path 0-1-2-3
    assert w == [Fraction(0), Fraction(2), Fraction(2), Fraction(0)]


def test_weighted_equals_unweighted_on_unit_lengths():
    g = grid_graph(4, 4, spacing=1.0)
    assert np.allclose(rg.raw_betweenness(g, weighted=True), rg.raw_betweenness(g))


def test_rgg_connected_largest_component():
    g = random_geometric_graph(80, np.random.default_rng(0), mean_degree=4.0)
    assert g.components() == 1


def test_edges_csv_round_trip(tmp_path):
    recs = [record("z", "a", "b", 0, 0, 100, 0)]
    p = tmp_path / "edges.csv"
    rg.write_edges_csv(p, recs)
    back = rg.read_edges_csv(p)
    assert back[0].node_a == "a" and back[0].lat_a == pytest.approx(recs[0].lat_a, abs=1e-6)
    p.write_text("zone_id,node_a_id\nz,a\n")
    with pytest.raises(ValueError):
        rg.read_edges_csv(p)


def test_minmax_constant():
    assert rg.minmax([3, 3, 3]).tolist() == [0, 0, 0]
    assert rg.minmax([1, 2, 3]).tolist() == [0, 0.5, 1]

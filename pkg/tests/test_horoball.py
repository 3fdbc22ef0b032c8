import pytest
from hypothesis import given, settings, strategies as st

from cuspcert.bfs import INF
from cuspcert.horoball import (DepthCapError, DepthMismatchError, HoroVertex, LevelGraph,
                               build_horoball, depth, enumerate_geodesics, hausdorff_to_geodesics,
                               horoball_distance, horoball_geodesic, level_ball, level_distance)

from oracles import adjacency_from_edges, bfs, horoball_edges

V = HoroVertex


@pytest.fixture(scope="module")
def path9():
    return build_horoball(LevelGraph.path(9), 4)


def test_vertex_count(path9):
    assert len(path9.vertices()) == 45


def test_b2_edge_rule(path9):
    assert path9.adjacent(V(0, 3), V(8, 3))
    assert not path9.adjacent(V(0, 2), V(8, 2))


def test_depth():
    assert depth(V("v", 0)) == 0
    assert depth(V("v", 7)) == 7


def test_vertical_edges_change_depth_by_one(path9):
    for u, w in path9.edges():
        if u.base == w.base:
            assert abs(depth(u) - depth(w)) == 1
        else:
            assert depth(u) == depth(w)


def test_level_distance_examples(path9):
    assert level_distance(path9, 0, V(0, 0), V(8, 0)) == 8
    assert level_distance(path9, 1, V(0, 1), V(8, 1)) == 4
    assert level_distance(path9, 3, V(0, 3), V(8, 3)) == 1
    with pytest.raises(DepthMismatchError):
        level_distance(path9, 1, V(0, 1), V(8, 2))


def test_level_ball_examples(path9):
    assert level_ball(path9, V(3, 1), 0) == {V(3, 1)}
    assert level_ball(path9, V(4, 0), 2) == {V(i, 0) for i in range(2, 7)}
    assert level_ball(path9, V(0, 2), 1) == {V(i, 2) for i in range(5)}


def test_geodesic_examples(path9):
    g = horoball_geodesic(path9, V(0, 0), V(8, 0))
    assert len(g) - 1 == 6
    assert [v.level for v in g] == [0, 1, 2, 2, 2, 1, 0]
    assert len(horoball_geodesic(path9, V(5, 0), V(5, 3))) - 1 == 3
    short = build_horoball(LevelGraph.path(3), 4)
    assert len(horoball_geodesic(short, V(0, 0), V(2, 0))) - 1 == 2
    assert short.distance(V(0, 0), V(2, 0)) == 2


def test_geodesic_is_an_edge_path(path9):
    for x in path9.vertices():
        for y in path9.vertices():
            if x == y:
                continue
            g = horoball_geodesic(path9, x, y)
            assert all(path9.adjacent(a, b) for a, b in zip(g, g[1:]))


def test_depth_cap_reported():
    h = build_horoball(LevelGraph.path(40), 2)
    with pytest.raises(DepthCapError):
        horoball_geodesic(h, V(0, 0), V(39, 0), max_hops=3)


def test_hausdorff_of_geodesic_to_itself_is_zero(path9):
    g = horoball_geodesic(path9, V(0, 0), V(8, 0))
    assert hausdorff_to_geodesics(path9, V(0, 0), V(8, 0), g) <= 4
    all_geos = enumerate_geodesics(path9, V(0, 0), V(8, 0))
    assert g in all_geos


@pytest.mark.parametrize("make", [lambda: LevelGraph.path(6), lambda: LevelGraph.cycle(7),
                                  lambda: LevelGraph.grid(3, 3)], ids=["path", "cycle", "grid"])
def test_adjacency_matches_edge_rules(make):
    lg = make()
    h = build_horoball(lg, 3)
    expected = horoball_edges(list(lg.vertices), lg.edges(), 3)
    got = {frozenset({tuple(u), tuple(w)}) for u, w in h.edges()}
    assert got == expected


@settings(max_examples=200, deadline=None)
@given(st.integers(0, 6), st.integers(0, 6), st.integers(0, 60), st.integers(1, 7))
def test_closed_form_matches_bfs(a, b, n, cap):
    """Closed-form horoball distance equals BFS on a path horoball."""
    a, b = min(a, cap), min(b, cap)
    h = build_horoball(LevelGraph.path(n + 1), cap)
    d = bfs(adjacency_from_edges({frozenset({tuple(u), tuple(w)}) for u, w in h.edges()}), (0, a))
    length, apex = horoball_distance(a, b, n, cap=cap)
    expected = d.get((n, b), INF)
    assert length == expected
    if length is not INF:
        assert max(a, b) <= apex <= cap


@settings(max_examples=40, deadline=None)
@given(st.integers(2, 12), st.integers(1, 4), st.data())
def test_level_distance_is_ceiling(n, m, data):
    h = build_horoball(LevelGraph.path(n), m)
    i = data.draw(st.integers(0, n - 1))
    j = data.draw(st.integers(0, n - 1))
    assert level_distance(h, m, V(i, m), V(j, m)) == -(-abs(i - j) // 2 ** m)


def test_export_formats(path9):
    edges = path9.export_edges()
    assert len(edges.strip().splitlines()) == len(path9.edges())
    assert path9.export_dot().startswith("graph")

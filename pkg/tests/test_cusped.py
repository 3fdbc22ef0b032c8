import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from cuspcert.cusped import (STAR, Base, Horo, Region, build_cusped, closest_level_vertex,
                             depth_of, level_path)
from cuspcert.groups import parse_group_spec

from oracles import bfs, materialize_cusped

Z2 = parse_group_spec("Z^2 rel a,b")
Z2FREE = parse_group_spec("Z^2 * Z^2 rel a,b; c,d")


@pytest.fixture(scope="module")
def small_free():
    X = build_cusped(Z2FREE, 3, 3)
    return X, materialize_cusped(X)


@pytest.fixture(scope="module")
def single():
    X = build_cusped(Z2, 8, 6)
    return X, X.certified_bfs(STAR)


def test_coset_count_matches_enumeration():
    X = build_cusped(Z2FREE, 2, 2)
    expected = {Z2FREE.peripheral_coset_of(g, 0) for g in Z2FREE.enumerate_ball((), 2)}
    assert set(X.enumerate_cosets(0)) == expected
    # identity, second-factor words of length 1 or 2, then (first letter, second letter)
    assert len(expected) == 1 + (4 + 8) + 4 * 4


def test_single_peripheral_has_one_horoball():
    X = build_cusped(Z2, 3, 3)
    assert len(X.enumerate_cosets(0)) == 1
    assert STAR in X


def test_depth_of():
    c = Z2.peripheral_coset_of((), 0)
    assert depth_of(STAR) == 0
    assert depth_of(Horo(c, (), 5)) == 5


def test_adjacency_matches_oracle(small_free):
    X, adj = small_free
    assert set(X.vertices()) == set(adj)
    for v, ws in adj.items():
        assert set(X.neighbors(v)) == ws
        assert all(abs(depth_of(v) - depth_of(w)) <= 1 for w in ws)


def test_adjacent_agrees_with_neighbors(small_free):
    X, adj = small_free
    verts = sorted(adj, key=repr)[:60]
    for u in verts:
        for w in verts:
            assert X.adjacent(u, w) == (w in adj[u])


def test_star_is_certified_at_zero(single):
    _, f = single
    assert f.value(STAR) == 0 and f.certified(STAR)


def test_certified_values_survive_enlargement():
    small = build_cusped(Z2, 6, 4).certified_bfs(STAR)
    big = build_cusped(Z2, 8, 6).certified_bfs(STAR)
    checked = 0
    for v, d in small.items():
        if small.certified(v):
            assert big.value(v) == d
            checked += 1
    assert checked > 20


def test_certified_values_match_oracle_in_larger_window():
    X = build_cusped(Z2FREE, 2, 2)
    f = X.certified_bfs(STAR)
    oracle = bfs(materialize_cusped(build_cusped(Z2FREE, 4, 4)), STAR)
    certified = [v for v, _ in f.items() if f.certified(v)]
    assert certified
    for v in certified:
        assert oracle[v] == f.value(v)


def test_certified_region_covers_inner_window(single):
    X, f = single
    for v, d in f.items():
        if d <= X.R - 2 and depth_of(v) <= X.D - 2 and len(v.element) + d <= X.R - 2:
            assert f.certified(v)


def test_path_distance_example():
    # level-D vertices are boundary, so the window needs depth past the apex
    X = build_cusped(parse_group_spec("Z rel a"), 64, 8)
    f = X.certified_bfs(STAR)
    assert f.exact(Base((0,) * 8)) == 6


def test_closest_level_vertex_examples(single):
    X, f = single
    c = Z2.peripheral_coset_of((), 0)
    z, d = closest_level_vertex(X, c, 3, f)
    assert z == Horo(c, (), 3) and d == 3
    Y = build_cusped(Z2FREE, 6, 3)
    cc = Z2FREE.peripheral_coset_of(Z2FREE.element("c"), 0)
    z, d = closest_level_vertex(Y, cc, 1, Y.certified_bfs(STAR))
    assert z == Horo(cc, Z2FREE.element("c"), 1) and d == 2


def test_level_path_is_an_edge_path(single):
    X, _ = single
    c = Z2.peripheral_coset_of((), 0)
    x, y = Z2.element("a^3 b^-2"), Z2.element("a^-2 b")
    p = level_path(X, c, 1, x, y)
    assert p[0].element == x and p[-1].element == y
    assert all(X.adjacent(u, w) for u, w in zip(p, p[1:]))
    assert len(p) - 1 == X.level_distance_in(c, 1, x, y)


def test_region_restricts_search(single):
    X, f = single
    region = Region(max_depth=2, avoid=(f, 1))
    assert region.exact()
    g = X.certified_bfs(Base(Z2.element("a^3")), region=region)
    assert all(depth_of(v) <= 2 and f.value(v) > 1 for v, _ in g.items())


def test_export_tags():
    X = build_cusped(Z2, 2, 2)
    text = X.export_edges()
    assert "B:e" in text and "H:" in text


@settings(max_examples=60, deadline=None)
@given(st.data())
def test_neighbor_symmetry(data):
    X = build_cusped(Z2FREE, 4, 3)
    verts = data.draw(st.sampled_from(X.vertices()))
    for w in X.neighbors(verts):
        assert verts in X.neighbors(w)


@settings(max_examples=30, deadline=None)
@given(st.data())
def test_depth_is_one_lipschitz(data):
    X = build_cusped(Z2, 6, 4)
    f = X.certified_bfs(STAR)
    v = data.draw(st.sampled_from(sorted((v for v, _ in f.items()), key=repr)))
    assert depth_of(v) <= f.value(v)


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 10 ** 6))
def test_level_distances_ignore_the_transversal(seed):
    """Swapping a coset's representative for another member leaves level distances unchanged."""
    X = build_cusped(Z2FREE, 6, 3)
    rng = np.random.default_rng(seed)
    cosets = X.enumerate_cosets(1)
    coset = cosets[int(rng.integers(len(cosets)))]
    blk = X.block(coset)
    members = [blk.element(a) for a in range(blk.n)]
    other = members[int(rng.integers(len(members)))]  # a different transversal choice
    g = X.group
    for _ in range(5):
        x, y = (members[int(i)] for i in rng.integers(len(members), size=2))
        for k in (1, 2):
            d = X.level_distance(Horo(coset, x, k), Horo(coset, y, k))
            shifted = g.distance(g.multiply(g.inverse(other), x), g.multiply(g.inverse(other), y))
            assert d == -(-shifted // 2 ** k)

from collections import deque

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from cuspcert import surgery
from cuspcert.cusped import STAR, Base, Horo, InconclusiveError, build_cusped
from cuspcert.groups import parse_group_spec
from cuspcert.surgery import EdgePath, HoroballFrame

from oracles import bfs, ddagger_minimal_n, materialize_cusped

Z2 = parse_group_spec("Z^2 rel a,b")
F2 = parse_group_spec("F2")
Z2FREE = parse_group_spec("Z^2 * Z^2 rel a,b; c,d")
P0 = Z2.peripheral_coset_of((), 0)


@pytest.fixture(scope="module")
def single():
    X = build_cusped(Z2, 8, 6)
    return X, X.certified_bfs(STAR)


@pytest.fixture(scope="module")
def wide():
    X = build_cusped(Z2, 64, 8)
    star = X.certified_bfs(STAR)
    return X, star, HoroballFrame(X, P0, 1, 1, star)


def el(g, text):
    return g.element(text)


# ------------------------------------------------------------ edge paths

def test_edge_path_rejects_gaps(single):
    X, _ = single
    with pytest.raises(ValueError):
        EdgePath([STAR, Base(el(Z2, "a^2"))], X)


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 10 ** 6), st.integers(1, 12))
def test_segments_reassemble(seed, steps):
    X = build_cusped(Z2FREE, 4, 3)
    rng = np.random.default_rng(seed)
    walk = [STAR]
    for _ in range(steps):
        nb = sorted(X.neighbors(walk[-1]), key=repr)
        walk.append(nb[int(rng.integers(len(nb)))])
    psi = EdgePath(walk, X)
    rebuilt = None
    for kind, seg in psi.segments():
        assert set(seg.edge_classes()) == {kind}
        rebuilt = seg if rebuilt is None else rebuilt.concat(seg)
    if psi.length:
        assert rebuilt == psi
    assert psi.reversed().reversed() == psi
    assert len(psi.edge_classes()) == psi.length


# ------------------------------------------------------------ projection

def test_vertical_spike_projects_to_a_point(single):
    X, _ = single
    x = el(Z2, "a^2")
    psi = EdgePath([Horo(P0, x, 1), Horo(P0, x, 2), Horo(P0, x, 3), Horo(P0, x, 2),
                    Horo(P0, x, 1)], X)
    gamma = surgery.project_to_level(X, psi, 1)
    assert gamma.length == 0 and gamma.start == Horo(P0, x, 1)


def test_one_deep_edge_projects_to_two_hops(single):
    X, _ = single
    k = 1
    x, y = (), el(Z2, "a^4")  # distance 2**(k+1)
    psi = EdgePath([Horo(P0, x, k), Horo(P0, x, k + 1), Horo(P0, y, k + 1), Horo(P0, y, k)], X)
    gamma = surgery.project_to_level(X, psi, k)
    assert gamma.length <= 2
    assert gamma.length == X.level_distance_in(P0, k, x, y)
    assert all(X.adjacent(u, w) for u, w in zip(gamma, gamma.vertices[1:]))


def test_projection_witnesses_on_random_excursions(wide):
    X, _, frame = wide
    sampler = surgery.ExcursionSampler(frame, seed=1, max_length=12)
    paths = sampler.draw(30)
    assert len(paths) == 30
    for psi in paths:
        gamma = surgery.project_to_level(X, psi, 1)
        assert None not in surgery.projection_witnesses(X, psi, gamma)


# ------------------------------------------------------------ escape rays

def test_escape_ray_z2_axis():
    ray = surgery.escape_ray(Z2, el(Z2, "a^3"), 1, 5)
    assert ray[1] == el(Z2, "a^4")
    assert all(len(p) >= 3 for p in ray)


def test_escape_ray_free_group():
    ray = surgery.escape_ray(F2, el(F2, "a b a"), 1, 6)
    assert [len(p) for p in ray] == list(range(3, 10))


def test_escape_ray_short_start():
    x = el(Z2, "a^2 b^2")
    with pytest.raises(ValueError):
        surgery.escape_ray(Z2, x, 2, 10)
    ray = surgery.escape_ray(Z2, x, 2, 10, check_precondition=False)
    assert all(len(p) > 2 for p in ray)
    assert all(Z2.distance(x, p) == i for i, p in enumerate(ray))


# ------------------------------------------------------------ annulus routing

def test_annulus_trivial_when_ends_agree(single):
    X, _ = single
    x = el(Z2, "a^3")
    assert surgery.annulus_connect(X, P0, 1, x, x, (), 2).length == 0


def grid_route_oracle(R, hole, start, end):
    """Restricted BFS on the grid points of L1 norm in (hole, R]."""
    def ok(p):
        return hole < abs(p[0]) + abs(p[1]) <= R
    dist = {start: 0}
    queue = deque([start])
    while queue:
        p = queue.popleft()
        for q in ((p[0] + 1, p[1]), (p[0] - 1, p[1]), (p[0], p[1] + 1), (p[0], p[1] - 1)):
            if ok(q) and q not in dist:
                dist[q] = dist[p] + 1
                queue.append(q)
    return dist.get(end)


def test_annulus_route_around_origin(single):
    X, _ = single
    x, y = el(Z2, "a^3"), el(Z2, "a^-3")
    path = surgery.annulus_connect(X, P0, 0, x, y, (), 4)  # avoids the ball of radius 2
    assert all(len(v.element) > 2 for v in path)
    assert all(X.adjacent(u, w) for u, w in zip(path, path.vertices[1:]))
    assert path.length == grid_route_oracle(8, 2, (3, 0), (-3, 0))


def test_annulus_max_length_grows_with_outer(single):
    X, _ = single
    blk = X.block(P0)
    dz = blk.geom.pdist(0, np.arange(blk.n))
    prev = -1
    for outer in (2, 3, 4):
        ends = [blk.element(a) for a in np.nonzero((dz > 2) & (dz <= outer * 2))[0]]
        f = max(surgery.annulus_connect(X, P0, 1, x, y, (), 2).length
                for x in ends for y in ends)
        assert f >= prev
        prev = f


# ------------------------------------------------------------ excursion lemmas

def test_casen2_trivial_and_negative_k(wide):
    X, _, frame = wide
    x = frame.z.element
    far = X.group.multiply(x, el(Z2, "a^6"))
    spike = EdgePath([Horo(P0, far, 1), Horo(P0, far, 2), Horo(P0, far, 1)], X)
    path, f = surgery.casen2_replace(frame, spike)
    assert path.length == 0 and f == 0
    y = X.group.multiply(far, el(Z2, "b^4"))
    psi = EdgePath([Horo(P0, far, 1), Horo(P0, far, 2), Horo(P0, y, 2), Horo(P0, y, 1)], X)
    r = frame.d_star_z - 1
    path, f = surgery.casen2_replace(frame, psi, r)
    assert path == surgery.project_to_level(X, psi, 1)


def test_case1_uses_doubled_bar(wide):
    X, _, frame = wide
    far = el(Z2, "a^20")
    y = X.group.multiply(far, el(Z2, "a^2"))
    psi = EdgePath([Horo(P0, far, 1), Horo(P0, far, 2), Horo(P0, y, 2), Horo(P0, y, 1)], X)
    # bar = 2 - 1/2 + 2 = 3.5, doubled to 7
    assert surgery.case1_hypothesis(frame, psi) is True
    rep = surgery.case1_check(frame, psi)
    assert rep.status == "pass"


def test_route_classification(wide):
    X, _, frame = wide
    far = el(Z2, "a^30")
    y = X.group.multiply(far, el(Z2, "a^2"))
    psi = EdgePath([Horo(P0, far, 1), Horo(P0, far, 2), Horo(P0, y, 2), Horo(P0, y, 1)], X)
    assert surgery.route(frame, psi) == "casen1"
    near = EdgePath([Horo(P0, (), 1), Horo(P0, (), 2), Horo(P0, el(Z2, "a^2"), 2),
                     Horo(P0, el(Z2, "a^2"), 1)], X)
    assert surgery.route(frame, near) == "casen2"


def test_small_excursion_sweep(wide):
    _, _, frame = wide
    res = surgery.excursion_sweep(frame, target=40, seed=2)
    for name in ("proj", "casen1", "casen2", "case1"):
        assert res.reports[name].violation_count == 0
    assert res.reports["proj"].pairs_checked >= 40


def test_f_table_flat_across_translates():
    X = build_cusped(Z2FREE, 24, 6)
    star = X.certified_bfs(STAR)
    c = Z2FREE.element("c")
    cosets = [Z2FREE.peripheral_coset_of(c * j, 0) for j in range(3)]
    res = surgery.casen2_f_table(X, cosets, 1, 2, 1, star)
    assert all(s == 0 for s in res["spread"].values())
    assert all(len(v) == 3 for v in res["table"].values())
    assert res["avoidance"].violation_count == 0


# ------------------------------------------------------------ compression

def test_compress_leaves_shallow_path_alone(single):
    X, star = single
    psi = EdgePath([Base(el(Z2, "a^2")), Horo(P0, el(Z2, "a^2"), 1), Horo(P0, el(Z2, "a^3"), 1)], X)
    res = surgery.compress_to_depth(X, psi, 1, 0, 1, star)
    assert res.path == psi and res.replaced == []


def test_split_excursions_spans():
    X = build_cusped(Z2, 8, 4)
    g = el(Z2, "a^2")
    psi = EdgePath(surgery.bump(X, P0, (), g, 3), X)
    spans = surgery.split_excursions(psi, 1)
    assert len(spans) == 1
    i, j = spans[0]
    assert psi[i].level == psi[j].level == 1


def test_compress_two_horoballs():
    X = build_cusped(Z2FREE, 24, 6)
    star = X.certified_bfs(STAR)
    g = Z2FREE
    start, mid = g.element("a^2"), g.element("b^2")
    end = g.multiply(mid, g.element("c^4"))
    c0 = g.peripheral_coset_of(start, 0)
    c1 = g.peripheral_coset_of(mid, 1)
    verts = surgery.bump(X, c0, start, mid, 3) + surgery.bump(X, c1, mid, end, 3)[1:]
    psi = EdgePath(verts, X)
    res = surgery.compress_to_depth(X, psi, 1, 1, 1, star)
    assert len(res.replaced) == 2
    assert res.path.start == psi.start and res.path.end == psi.end
    assert res.path.depth_range()[1] <= 1
    assert all(X.adjacent(u, w) for u, w in zip(res.path, res.path.vertices[1:]))
    rep = surgery.compress_check(X, psi, 1, 1, star, {}, r=1)
    assert rep.status == "pass"


# ------------------------------------------------------------ far-out pairs

@pytest.mark.parametrize("delta", range(1, 21))
def test_constants(delta):
    assert surgery.star_M(delta) == 290 * delta + 3
    assert surgery.star_K(delta) == 2 * surgery.star_M(delta)


def test_star_examples(single):
    X, star = single
    x = Base(el(Z2, "a^2"))
    assert surgery.star_M(1) == 293 and surgery.star_K(1) == 586
    assert surgery.check_star(X, x, x, 0, 1, star).holds
    y = Base(el(Z2, "a b"))
    for eps in range(0, 4):
        if surgery.check_star(X, x, y, eps, 1, star).holds:
            assert surgery.check_star(X, x, y, eps + 1, 1, star).holds


def test_ddagger_trivial_cases(single):
    X, star = single
    x, y = Base(el(Z2, "a^3")), Base(el(Z2, "a^4"))
    assert surgery.search_ddagger(X, x, x, 1, 5, star=star, forbidden_radius=1).N == 0
    w = surgery.search_ddagger(X, x, y, 1, 5, star=star, forbidden_radius=1)
    assert w.N == 1 and w.path.length == 1


def test_ddagger_default_radius_is_negative_at_window_scale():
    assert surgery.ddagger_radius(6, 1, surgery.PLAIN) < 0
    assert surgery.ddagger_radius(6, 1, surgery.HAT) < 0


@pytest.fixture(scope="module")
def tiny_free():
    X = build_cusped(Z2FREE, 3, 3)
    return X, materialize_cusped(X), X.certified_bfs(STAR)


@settings(max_examples=40, deadline=None)
@given(st.data())
def test_ddagger_matches_oracle(tiny_free, data):
    X, adj, star = tiny_free
    cert = sorted((v for v, d in star.items() if star.certified(v)), key=repr)
    x = data.draw(st.sampled_from(cert))
    y = data.draw(st.sampled_from(cert))
    radius = data.draw(st.integers(-1, 1))
    cap = data.draw(st.sampled_from([None, 1, 2]))
    variant = surgery.HAT if cap is not None else surgery.PLAIN
    try:
        w = surgery.search_ddagger(X, x, y, 1, 8, variant, star, radius, cap)
    except InconclusiveError:
        return
    expected = ddagger_minimal_n(adj, x, y, radius, cap, 8)
    assert w.N == expected
    if w.path is not None:
        assert all(bfs(adj, STAR)[v] > radius for v in w.path)


def test_sweep_reports_k_parities(wide):
    _, _, frame = wide
    res = surgery.excursion_sweep(frame, target=40, seed=3)
    parity = res.reports["casen2"].constants_observed["by_k_parity"]
    assert set(parity) == {"negative", "even", "odd"}
    assert sum(v["checked"] for v in parity.values()) == res.reports["casen2"].pairs_checked
    assert parity["even"]["checked"] and parity["odd"]["checked"]

import pytest
from hypothesis import given, settings, strategies as st

from cuspcert.groups import (MalformedWordError, enumerate_ball, free_abelian, free_group,
                             neighbors, normal_form, parse_group_spec, peripheral_coset_of)

Z2 = parse_group_spec("Z^2")
F2 = parse_group_spec("F2")
Z2FREE = parse_group_spec("Z^2 * Z^2 rel a,b; c,d")


def words(g, max_size=12):
    return st.lists(st.integers(0, 2 * g.rank - 1), max_size=max_size).map(tuple)


def fmt(g, w):
    return g.format(w)


def test_normal_form_cancellations():
    assert fmt(Z2, normal_form(Z2, "a b a^-1")) == "b"
    assert fmt(F2, normal_form(F2, "a b b^-1 a")) == "a a"
    assert fmt(Z2FREE, normal_form(Z2FREE, "a c c^-1 b")) == "a b"


def test_normal_form_accepts_superscript_inverse():
    assert normal_form(F2, "a b⁻¹ b") == normal_form(F2, "a")


def test_malformed_word_rejected():
    with pytest.raises(MalformedWordError):
        F2.parse("a q")


def test_neighbors_examples():
    assert {fmt(Z2, w) for w in neighbors(Z2, ())} == {"a", "a^-1", "b", "b^-1"}
    a = F2.element("a")
    assert {fmt(F2, w) for w in neighbors(F2, a)} == {"", "a a", "a b", "a b^-1"}
    a = Z2FREE.element("a")
    assert {fmt(Z2FREE, w) for w in neighbors(Z2FREE, a)} == {
        "", "a a", "a b", "a b^-1", "a c", "a c^-1", "a d", "a d^-1"}


def test_ball_sizes():
    assert len(enumerate_ball(Z2, (), 1)) == 5
    assert len(enumerate_ball(Z2, (), 2)) == 13
    assert len(enumerate_ball(F2, (), 2)) == 17


@pytest.mark.parametrize("r", range(0, 7))
def test_z2_ball_size_formula(r):
    assert len(enumerate_ball(Z2, (), r)) == 2 * r * r + 2 * r + 1


@pytest.mark.parametrize("r", range(1, 6))
def test_free_sphere_sizes(r):
    ball = enumerate_ball(F2, (), r)
    inner = enumerate_ball(F2, (), r - 1)
    assert len(ball) - len(inner) == 4 * 3 ** (r - 1)


def test_peripheral_coset_examples():
    # peripheral indices are 0-based: 0 is <a,b>, 1 is <c,d>
    g = Z2FREE
    assert peripheral_coset_of(g, g.element("a b"), 0).representative == ()
    assert fmt(g, peripheral_coset_of(g, g.element("c a"), 0).representative) == "c"
    assert peripheral_coset_of(g, g.element("c"), 1).representative == ()


def test_group_spec_rejects_unknown_peripheral():
    with pytest.raises(ValueError):
        parse_group_spec("Z^2 rel q")


def test_factories_agree_with_parser():
    assert free_abelian(2).rank == 2
    assert free_group(2).rank == 2


@pytest.mark.parametrize("g", [Z2, F2, Z2FREE], ids=["Z2", "F2", "Z2FREE"])
@settings(max_examples=60, deadline=None)
@given(data=st.data())
def test_normal_form_idempotent(g, data):
    w = data.draw(words(g))
    nf = normal_form(g, w)
    assert normal_form(g, nf) == nf


@pytest.mark.parametrize("g", [Z2, F2, Z2FREE], ids=["Z2", "F2", "Z2FREE"])
@settings(max_examples=60, deadline=None)
@given(data=st.data())
def test_neighbor_relation_symmetric(g, data):
    x = normal_form(g, data.draw(words(g)))
    for y in neighbors(g, x):
        assert x in neighbors(g, y)
        assert g.distance(x, y) == 1


@settings(max_examples=80, deadline=None)
@given(words(Z2FREE), words(Z2FREE))
def test_word_metric_is_a_metric(u, v):
    g = Z2FREE
    x, y = normal_form(g, u), normal_form(g, v)
    assert g.distance(x, y) == g.distance(y, x)
    assert (g.distance(x, y) == 0) == (x == y)
    assert g.distance((), y) <= g.distance((), x) + g.distance(x, y)


@settings(max_examples=80, deadline=None)
@given(words(Z2FREE), st.lists(st.sampled_from([0, 1, 2, 3]), max_size=8).map(tuple),
       st.sampled_from([0, 1]))
def test_coset_representative_additivity(u, p, i):
    """|t p| = |t| + |p| for the coset representative t and p in P_i."""
    g = Z2FREE
    x = normal_form(g, u)
    t = peripheral_coset_of(g, x, i).representative
    letters = g.peripheral_letters(i)
    q = normal_form(g, tuple(letters[l] for l in p))
    assert len(g.multiply(t, q)) == len(t) + len(q)
    assert peripheral_coset_of(g, g.multiply(x, q), i).representative == t


@pytest.mark.parametrize("i", [0, 1])
def test_cosets_partition_ball(i):
    g = Z2FREE
    ball = enumerate_ball(g, (), 4)
    by_coset = {}
    for x in ball:
        by_coset.setdefault(peripheral_coset_of(g, x, i), set()).add(x)
    assert sum(len(s) for s in by_coset.values()) == len(ball)
    for coset, members in by_coset.items():
        t = coset.representative
        assert all(len(t) <= len(x) for x in members)
        assert all(g.in_peripheral(g.multiply(g.inverse(t), x), i) for x in members)

import json

from hypothesis import given, strategies as st

from cuspcert.report import FAIL, INCONCLUSIVE, PASS, LemmaReport, canonical_json

counts = st.tuples(st.integers(0, 50), st.integers(0, 50), st.integers(0, 3))


def make(c):
    rep = LemmaReport("x", {"R": 1}, 1, pairs_checked=c[0], pairs_skipped_uncertified=c[1])
    for i in range(c[2]):
        rep.add_violation(i=i)
    rep.observe("seen", c[0])
    return rep


@given(counts, counts, counts)
def test_merge_is_associative(a, b, c):
    left = make(a).merge(make(b)).merge(make(c))
    right = make(a).merge(make(b).merge(make(c)))
    assert left.to_dict() == right.to_dict()
    assert left.pairs_checked == a[0] + b[0] + c[0]
    assert left.violation_count == a[2] + b[2] + c[2]


def test_status_semantics():
    assert LemmaReport("x").status == INCONCLUSIVE
    assert LemmaReport("x", pairs_checked=3).status == PASS
    rep = LemmaReport("x", pairs_checked=3)
    rep.add_violation(v=1)
    assert rep.status == FAIL
    rep.asserted = False
    assert rep.status == PASS


def test_violation_list_is_capped():
    rep = LemmaReport("x")
    for i in range(80):
        rep.add_violation(i=i)
    assert rep.violation_count == 80 and len(rep.violations) == 50


def test_json_round_trip():
    rep = make((4, 2, 1))
    back = LemmaReport.from_dict(json.loads(rep.to_json()))
    assert back.to_json() == rep.to_json()
    assert canonical_json({"b": 1, "a": (1, 2)}) == '{\n  "a": [\n    1,\n    2\n  ],\n  "b": 1\n}\n'

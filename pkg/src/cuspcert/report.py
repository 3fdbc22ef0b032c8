"""Lemma reports and their canonical serialization."""
from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field
from typing import Any

SCHEMA_VERSION = 1

PASS = "pass"
FAIL = "fail"
INCONCLUSIVE = "inconclusive"

MAX_LISTED_VIOLATIONS = 50


def _plain(obj: Any) -> Any:
    """Convert tuples, numpy scalars and sets into JSON-friendly values."""
    if isinstance(obj, dict):
        return {str(k): _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    if isinstance(obj, (set, frozenset)):
        return sorted(_plain(v) for v in obj)
    if hasattr(obj, "item") and not isinstance(obj, (str, bytes)):
        return obj.item()
    if obj is None or isinstance(obj, (bool, int, float, str)):
        return obj
    return repr(obj)


@dataclass
class LemmaReport:
    lemma: str
    instance: dict = field(default_factory=dict)
    delta: int | None = None
    pairs_checked: int = 0
    pairs_skipped_uncertified: int = 0
    violations: list = field(default_factory=list)
    violation_count: int = 0
    constants_observed: dict = field(default_factory=dict)
    notes: list = field(default_factory=list)
    asserted: bool = True
    wall_time_ms: float | None = None

    def add_violation(self, **info) -> None:
        self.violation_count += 1
        if len(self.violations) < MAX_LISTED_VIOLATIONS:
            self.violations.append(_plain(info))

    def observe(self, key: str, value) -> None:
        self.constants_observed[key] = _plain(value)

    def observe_max(self, key: str, value) -> None:
        old = self.constants_observed.get(key)
        if old is None or value > old:
            self.constants_observed[key] = _plain(value)

    @property
    def status(self) -> str:
        if self.violation_count and self.asserted:
            return FAIL
        if self.pairs_checked == 0:
            return INCONCLUSIVE
        return PASS

    @property
    def passed(self) -> bool:
        return self.status == PASS

    def merge(self, other: "LemmaReport") -> "LemmaReport":
        """Associative merge of two sweeps over disjoint samples."""
        if other.lemma != self.lemma:
            raise ValueError("cannot merge reports of different lemmas")
        out = LemmaReport(self.lemma, dict(self.instance), self.delta,
                          self.pairs_checked + other.pairs_checked,
                          self.pairs_skipped_uncertified + other.pairs_skipped_uncertified,
                          (self.violations + other.violations)[:MAX_LISTED_VIOLATIONS],
                          self.violation_count + other.violation_count,
                          dict(self.constants_observed), self.notes + [n for n in other.notes if n not in self.notes],
                          self.asserted and other.asserted)
        for k, v in other.constants_observed.items():
            mine = out.constants_observed.get(k)
            if isinstance(v, (int, float)) and isinstance(mine, (int, float)):
                out.constants_observed[k] = max(mine, v)
            elif mine is None:
                out.constants_observed[k] = v
        return out

    def to_dict(self) -> dict:
        d = asdict(self)
        d["status"] = self.status
        d["schema_version"] = SCHEMA_VERSION
        return _plain(d)

    def to_json(self) -> str:
        return canonical_json(self.to_dict())

    @classmethod
    def from_dict(cls, d: dict) -> "LemmaReport":
        keys = {f for f in cls.__dataclass_fields__}
        return cls(**{k: v for k, v in d.items() if k in keys})


def canonical_json(obj) -> str:
    return json.dumps(_plain(obj), sort_keys=True, indent=2, ensure_ascii=False) + "\n"

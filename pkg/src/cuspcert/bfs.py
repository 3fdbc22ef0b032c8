"""Breadth-first search with truncation honesty.

A graph is explored inside a finite window.  Some window vertices have
neighbours in the full (infinite) space that the window omits; those are
*boundary* vertices.  If ``b`` is the smallest BFS value of a boundary vertex,
every vertex whose value is at most ``b`` has a value that no path leaving the
window can beat, so it is certified exact.
"""
from __future__ import annotations

from collections import deque
from typing import Callable, Hashable, Iterable, Iterator


class _Infinity:
    """Explicit sentinel for unreachable or unknown distances."""

    _instance = None

    def __new__(cls):
        if cls._instance is None:
            cls._instance = super().__new__(cls)
        return cls._instance

    def __repr__(self) -> str:
        return "INF"

    def __reduce__(self):
        return (_Infinity, ())

    def _cmp(self, other) -> int:
        if other is self:
            return 0
        if isinstance(other, (int, float)):
            return 1
        return NotImplemented

    def __lt__(self, other):
        c = self._cmp(other)
        return c if c is NotImplemented else c < 0

    def __le__(self, other):
        c = self._cmp(other)
        return c if c is NotImplemented else c <= 0

    def __gt__(self, other):
        c = self._cmp(other)
        return c if c is NotImplemented else c > 0

    def __ge__(self, other):
        c = self._cmp(other)
        return c if c is NotImplemented else c >= 0

    def __eq__(self, other):
        return other is self

    def __hash__(self):
        return hash("INF")

    def __add__(self, other):
        return self

    __radd__ = __add__


INF = _Infinity()


def is_finite(x) -> bool:
    return x is not INF


class DistanceField:
    """BFS distances from ``source`` inside a truncated window.

    ``bound`` is the least value of a boundary vertex (``INF`` if none was
    met), ``radius`` the last fully expanded layer and ``complete`` tells
    whether the search ran out of vertices before its horizon.
    """

    def __init__(self, source, values: dict, bound=INF, radius: int = 0,
                 complete: bool = False):
        self.source = source
        self._values = values
        self.bound = bound
        self.radius = radius
        self.complete = complete

    # subclasses override value() and iteration for array-backed storage
    def value(self, v):
        return self._values.get(v, INF)

    @property
    def values(self) -> dict:
        return self._values

    def __contains__(self, v) -> bool:
        return self.value(v) is not INF

    def __len__(self) -> int:
        return len(self.values)

    def items(self) -> Iterator:
        return iter(self.values.items())

    def certified(self, v) -> bool:
        val = self.value(v)
        return val is not INF and val <= self.bound

    def exact(self, v):
        """Certified distance or ``None``."""
        val = self.value(v)
        if val is not INF and val <= self.bound:
            return val
        return None

    def upper_bound(self, v):
        """Window paths are real paths, so any BFS value bounds the distance."""
        return self.value(v)

    def lower_bound(self, v):
        val = self.value(v)
        if val is not INF and val <= self.bound:
            return val
        return self.floor_outside()

    def floor_outside(self):
        """Lower bound for every vertex not certified by this field."""
        if self.complete:
            return self.bound + 1 if self.bound is not INF else INF
        cap = self.radius if self.bound is INF else min(self.bound, self.radius)
        return cap + 1

    def certified_radius(self) -> int:
        if self.bound is INF:
            return self.radius if not self.complete else max(self.values.values(), default=0)
        return min(self.bound, self.radius) if not self.complete else self.bound


def layered_bfs(source: Hashable,
                neighbors: Callable[[Hashable], Iterable[Hashable]],
                is_boundary: Callable[[Hashable], bool] = lambda v: False,
                horizon: int | None = None,
                allowed: Callable[[Hashable], bool] | None = None,
                stop_at_bound: bool = False) -> DistanceField:
    """Plain queue BFS used for small explicit graphs.

    With ``stop_at_bound`` the search halts once the layer holding the first
    boundary vertex is complete, which is all certification needs.
    """
    values = {source: 0}
    bound = 0 if is_boundary(source) else INF
    frontier = [source]
    depth = 0
    while frontier:
        if horizon is not None and depth >= horizon:
            return DistanceField(source, values, bound, depth, False)
        if stop_at_bound and bound is not INF and depth >= bound:
            return DistanceField(source, values, bound, depth, False)
        nxt = []
        for u in frontier:
            for w in neighbors(u):
                if w in values or (allowed is not None and not allowed(w)):
                    continue
                values[w] = depth + 1
                if bound is INF and is_boundary(w):
                    bound = depth + 1
                nxt.append(w)
        frontier = nxt
        depth += 1
    return DistanceField(source, values, bound, depth, True)


def bfs_path(source, target, neighbors, allowed=None, max_length: int | None = None):
    """Shortest path as a vertex list, or ``None``; deterministic parent choice."""
    if source == target:
        return [source]
    parent = {source: None}
    queue = deque([(source, 0)])
    while queue:
        u, d = queue.popleft()
        if max_length is not None and d >= max_length:
            continue
        for w in neighbors(u):
            if w in parent or (allowed is not None and not allowed(w)):
                continue
            parent[w] = u
            if w == target:
                path = [w]
                while parent[path[-1]] is not None:
                    path.append(parent[path[-1]])
                return path[::-1]
            queue.append((w, d + 1))
    return None

"""Combinatorial horoballs over finite level graphs.

Level 0 copies the level graph; at level ``k > 0`` two vertices are joined
when their level-graph distance lies in ``(0, 2**k]``; consecutive levels over
the same vertex are joined by vertical edges.  Nothing above level 0 is stored
as an edge list: horizontal neighbours come from the distance matrix.
"""
from __future__ import annotations

import itertools
from typing import Callable, Hashable, Iterable, NamedTuple, Sequence

import numpy as np
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import shortest_path

from .bfs import INF, DistanceField, layered_bfs


class DepthCapError(RuntimeError):
    """A requested geodesic would climb above the configured depth cap."""


class DepthMismatchError(ValueError):
    pass


class DisconnectedGraphError(ValueError):
    pass


class HoroVertex(NamedTuple):
    base: Hashable
    level: int


def ceil_div(n: int, d: int) -> int:
    return -(-n // d)


def level_steps(n: int, level: int) -> int:
    """Length of a shortest level-``level`` path spanning graph distance ``n``."""
    return ceil_div(n, 1 << level)


def horoball_distance(a: int, b: int, n: int, cap: int | None = None,
                      max_hops: int | None = None) -> tuple[int, int]:
    """Best (length, apex) over up-horizontal-down paths.

    ``a`` and ``b`` are the endpoint levels, ``n`` the level-graph distance of
    their bases.  Ties go to the lower apex.  Returns ``(INF, -1)`` if no apex
    up to ``cap`` qualifies.
    """
    best, apex = INF, -1
    j = max(a, b)
    top = cap if cap is not None else max(j, n.bit_length() + 1)
    while j <= top:
        hops = level_steps(n, j)
        if max_hops is None or hops <= max_hops:
            total = 2 * j - a - b + hops
            if best is INF or total < best:
                best, apex = total, j
        if hops <= 1:
            break
        j += 1
    return best, apex


class LevelGraph:
    """Finite, connected, simple graph with cached all-pairs distances."""

    def __init__(self, vertices: Sequence[Hashable],
                 edges: Iterable[tuple[Hashable, Hashable]]):
        self.vertices = tuple(vertices)
        if len(set(self.vertices)) != len(self.vertices):
            raise ValueError("duplicate vertex labels")
        if not self.vertices:
            raise ValueError("a level graph needs at least one vertex")
        self.index = {v: i for i, v in enumerate(self.vertices)}
        adj: list[set[int]] = [set() for _ in self.vertices]
        for u, w in edges:
            if u == w:
                raise ValueError(f"loop at {u!r}")
            i, j = self.index[u], self.index[w]
            adj[i].add(j)
            adj[j].add(i)
        self._adj = tuple(tuple(sorted(s)) for s in adj)
        n = len(self.vertices)
        rows = [i for i in range(n) for _ in self._adj[i]]
        cols = [j for i in range(n) for j in self._adj[i]]
        mat = csr_matrix((np.ones(len(rows)), (rows, cols)), shape=(n, n))
        dist = shortest_path(mat, method="D", unweighted=True, directed=False)
        if np.isinf(dist).any():
            raise DisconnectedGraphError("level graph must be connected")
        self.dist = dist.astype(np.int64)

    @classmethod
    def path(cls, n: int) -> "LevelGraph":
        return cls(range(n), ((i, i + 1) for i in range(n - 1)))

    @classmethod
    def cycle(cls, n: int) -> "LevelGraph":
        if n < 3:
            raise ValueError("a simple cycle needs at least 3 vertices")
        return cls(range(n), ((i, (i + 1) % n) for i in range(n)))

    @classmethod
    def grid(cls, rows: int, cols: int) -> "LevelGraph":
        verts = [(i, j) for i in range(rows) for j in range(cols)]
        edges = [((i, j), (i + 1, j)) for i in range(rows - 1) for j in range(cols)]
        edges += [((i, j), (i, j + 1)) for i in range(rows) for j in range(cols - 1)]
        return cls(verts, edges)

    def __len__(self) -> int:
        return len(self.vertices)

    def distance(self, u, w) -> int:
        return int(self.dist[self.index[u], self.index[w]])

    def adjacent(self, u) -> list:
        return [self.vertices[j] for j in self._adj[self.index[u]]]

    def edges(self) -> list[tuple]:
        return [(self.vertices[i], self.vertices[j])
                for i in range(len(self.vertices)) for j in self._adj[i] if i < j]

    def geodesic(self, u, w) -> list:
        """Deterministic shortest path: always step to the lowest-index closer vertex."""
        i, j = self.index[u], self.index[w]
        path = [i]
        while path[-1] != j:
            cur = path[-1]
            nxt = min(k for k in self._adj[cur] if self.dist[k, j] == self.dist[cur, j] - 1)
            path.append(nxt)
        return [self.vertices[k] for k in path]


class HoroballGraph:
    """H(Gamma) truncated at depth ``depth_cap``; immutable, implicit adjacency."""

    def __init__(self, level_graph: LevelGraph, depth_cap: int):
        if depth_cap < 0:
            raise ValueError("depth cap must be non-negative")
        self.level_graph = level_graph
        self.depth_cap = depth_cap

    def __repr__(self) -> str:
        return f"HoroballGraph(|V(Gamma)|={len(self.level_graph)}, D={self.depth_cap})"

    def vertices(self) -> list[HoroVertex]:
        return [HoroVertex(v, k) for k in range(self.depth_cap + 1)
                for v in self.level_graph.vertices]

    def level_vertices(self, m: int) -> list[HoroVertex]:
        return [HoroVertex(v, m) for v in self.level_graph.vertices]

    def __contains__(self, v) -> bool:
        return (isinstance(v, tuple) and len(v) == 2 and v[0] in self.level_graph.index
                and isinstance(v[1], int) and 0 <= v[1] <= self.depth_cap)

    def _check(self, v) -> HoroVertex:
        if v not in self:
            raise ValueError(f"{v!r} is not a vertex of {self!r}")
        return HoroVertex(*v)

    def horizontal_neighbors(self, v: HoroVertex) -> list[HoroVertex]:
        base, k = self._check(v)
        g = self.level_graph
        if k == 0:
            return [HoroVertex(w, 0) for w in g.adjacent(base)]
        row = g.dist[g.index[base]]
        hits = np.nonzero((row > 0) & (row <= (1 << k)))[0]
        return [HoroVertex(g.vertices[j], k) for j in hits]

    def neighbors(self, v: HoroVertex) -> list[HoroVertex]:
        base, k = self._check(v)
        out = []
        if k > 0:
            out.append(HoroVertex(base, k - 1))
        if k < self.depth_cap:
            out.append(HoroVertex(base, k + 1))
        out.extend(self.horizontal_neighbors(v))
        return out

    def adjacent(self, u, v) -> bool:
        u, v = self._check(u), self._check(v)
        if u.base == v.base:
            return abs(u.level - v.level) == 1
        if u.level != v.level:
            return False
        d = self.level_graph.distance(u.base, v.base)
        if u.level == 0:
            return d == 1
        return 0 < d <= (1 << u.level)

    def is_boundary(self, v) -> bool:
        """Vertices whose neighbours above the cap are missing."""
        return v[1] >= self.depth_cap

    def edges(self) -> list[tuple[HoroVertex, HoroVertex]]:
        out = []
        for v in self.vertices():
            for w in self.neighbors(v):
                if (v.level, self.level_graph.index[v.base]) < (w.level, self.level_graph.index[w.base]):
                    out.append((v, w))
        return out

    def bfs(self, source, horizon: int | None = None, allowed=None) -> DistanceField:
        source = self._check(source)
        return layered_bfs(source, self.neighbors, self.is_boundary, horizon, allowed)

    def distance(self, x, y) -> int:
        """Exact distance in the infinite-depth horoball (closed form)."""
        x, y = self._check(x), self._check(y)
        n = self.level_graph.distance(x.base, y.base)
        return horoball_distance(x.level, y.level, n)[0]

    def export_edges(self, path=None) -> str:
        lines = [f"{u.level} {u.base} {v.level} {v.base}" for u, v in self.edges()]
        text = "\n".join(lines) + ("\n" if lines else "")
        if path is not None:
            with open(path, "w") as fh:
                fh.write(text)
        return text

    def export_dot(self, path=None, max_edges: int = 5000) -> str:
        edges = self.edges()
        if len(edges) > max_edges:
            raise ValueError(f"{len(edges)} edges exceed the DOT export limit of {max_edges}")
        out = ["graph horoball {"]
        for u, v in edges:
            style = " [style=dashed]" if u.base == v.base else ""
            out.append(f'  "{u.base}@{u.level}" -- "{v.base}@{v.level}"{style};')
        out.append("}")
        text = "\n".join(out) + "\n"
        if path is not None:
            with open(path, "w") as fh:
                fh.write(text)
        return text


def build_horoball(level_graph: LevelGraph, depth_cap: int) -> HoroballGraph:
    return HoroballGraph(level_graph, depth_cap)


def depth(v) -> int:
    return v[1] if isinstance(v, tuple) and len(v) == 2 else v.level


def level_distance(h: HoroballGraph, m: int, x, y):
    """BFS distance inside the level-``m`` subgraph, ``INF`` if disconnected."""
    x, y = h._check(x), h._check(y)
    if x.level != m or y.level != m:
        raise DepthMismatchError(f"both vertices must lie at level {m}")
    field = layered_bfs(x, h.horizontal_neighbors)
    return field.value(y)


def level_ball(h: HoroballGraph, z, n: int) -> set[HoroVertex]:
    z = h._check(z)
    field = layered_bfs(z, h.horizontal_neighbors, horizon=n)
    return {v for v, d in field.items() if d <= n}


def horoball_geodesic(h: HoroballGraph, x, y, max_hops: int = 3) -> list[HoroVertex]:
    """Up, at most ``max_hops`` horizontal edges, down; lowest apex on ties."""
    x, y = h._check(x), h._check(y)
    if x == y:
        raise ValueError("endpoints must be distinct")
    g = h.level_graph
    n = g.distance(x.base, y.base)
    length, apex = horoball_distance(x.level, y.level, n, cap=h.depth_cap, max_hops=max_hops)
    if length is INF:
        raise DepthCapError(f"no geodesic of the required shape below depth {h.depth_cap}")
    path = [HoroVertex(x.base, k) for k in range(x.level, apex + 1)]
    if n:
        line = g.geodesic(x.base, y.base)
        step = 1 << apex
        for pos in range(step, n, step):
            path.append(HoroVertex(line[pos], apex))
        path.append(HoroVertex(y.base, apex))
    path.extend(HoroVertex(y.base, k) for k in range(apex - 1, y.level - 1, -1))
    return path


# --------------------------------------------------------------- Hausdorff

def _all_fields(h: HoroballGraph) -> dict:
    return {v: h.bfs(v).values for v in h.vertices()}


def geodesic_interval(h: HoroballGraph, x, y, dist: dict | None = None) -> set:
    dx = dist[x] if dist else h.bfs(x).values
    dy = dist[y] if dist else h.bfs(y).values
    total = dx[y]
    return {v for v in dx if v in dy and dx[v] + dy[v] == total}


def hausdorff_to_geodesics(h: HoroballGraph, x, y, path: Sequence, dist: dict | None = None) -> int:
    """Largest Hausdorff distance between ``path`` and any geodesic from x to y.

    Exact without listing geodesics: one direction is a maximum over the
    geodesic interval; the other asks, for each path vertex q, for the
    largest radius such that some geodesic avoids the ball of that radius
    around q, which is a reachability question on the geodesic DAG.
    """
    if dist is None:
        dist = _all_fields(h)
    dx = dist[x]
    total = dx[y]
    interval = geodesic_interval(h, x, y, dist)
    pathset = list(path)
    worst = 0
    for p in interval:
        worst = max(worst, min(dist[p][q] for q in pathset))
    layers: dict[int, list] = {}
    for v in interval:
        layers.setdefault(dx[v], []).append(v)
    for q in pathset:
        dq = dist[q]
        # largest s such that a geodesic stays at distance >= s from q
        lo = min(dq[v] for v in interval)
        hi = max(dq[v] for v in interval)
        best = lo
        for s in range(hi, lo, -1):
            if _geodesic_avoids(h, layers, total, lambda v: dq[v] >= s):
                best = s
                break
        worst = max(worst, best)
    return worst


def _geodesic_avoids(h: HoroballGraph, layers: dict, total: int,
                     ok: Callable) -> bool:
    reach = {v for v in layers[0] if ok(v)}
    for t in range(1, total + 1):
        nxt = set()
        for v in layers.get(t, ()):
            if ok(v) and any(h.adjacent(u, v) for u in reach):
                nxt.add(v)
        reach = nxt
        if not reach:
            return False
    return bool(reach)


def enumerate_geodesics(h: HoroballGraph, x, y, limit: int = 100_000) -> list[list]:
    """Every geodesic from x to y, by DFS over the geodesic DAG."""
    dx = h.bfs(x).values
    dy = h.bfs(y).values
    total = dx[y]
    out: list[list] = []

    def walk(path):
        if len(out) > limit:
            raise RuntimeError("too many geodesics to enumerate")
        v = path[-1]
        if v == y:
            out.append(list(path))
            return
        for w in h.neighbors(v):
            if dx.get(w) == len(path) and dy.get(w) == total - len(path):
                path.append(w)
                walk(path)
                path.pop()

    walk([x])
    return out


def hausdorff(paths_a: Sequence, paths_b: Sequence, dist: dict) -> int:
    a, b = list(paths_a), list(paths_b)
    one = max(min(dist[p][q] for q in b) for p in a)
    two = max(min(dist[q][p] for p in a) for q in b)
    return max(one, two)


# ------------------------------------------------------------- 2-cells

def cell_counts(h: HoroballGraph) -> dict[str, int]:
    """Counts of attached 2-cells; these play no metric role."""
    g = h.level_graph
    D = h.depth_cap
    n = len(g)
    dist = g.dist

    def hedge(i: int, j: int, k: int) -> bool:
        d = dist[i, j]
        return d == 1 if k == 0 else 0 < d <= (1 << k)

    triangles = squares = pentagons = 0
    for k in range(D + 1):
        for i, j, l in itertools.combinations(range(n), 3):
            if hedge(i, j, k) and hedge(j, l, k) and hedge(i, l, k):
                triangles += 1
    for k in range(D):
        for i, j in itertools.combinations(range(n), 2):
            if hedge(i, j, k) and hedge(i, j, k + 1):
                squares += 1
    for k in range(D):
        for i, j in itertools.combinations(range(n), 2):
            for mid in range(n):
                if mid in (i, j):
                    continue
                # top edge i-j at level k+1, bottom path i-mid-j at level k
                if hedge(i, j, k + 1) and hedge(i, mid, k) and hedge(mid, j, k):
                    if not (hedge(i, j, k)):
                        pentagons += 1
                # top path i-mid-j at level k+1, bottom edge i-j at level k:
                # always the union of a square and a triangle, so never attached
    return {"C1": triangles, "C2": squares, "C3": pentagons}

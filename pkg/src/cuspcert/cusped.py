"""Truncated cusped spaces over catalog groups.

The window holds the Cayley ball of radius ``R`` about the identity and, over
every peripheral coset meeting that ball, a horoball with levels ``1..D``.
Level 0 of each horoball is identified with the coset's base vertices.

Vertices are never enumerated up front.  A coset ``tP`` (``t`` its
shortlex-least element) meets the ball in ``{t p : |p| <= R - |t|}``, because
``|t p| = |t| + |p|`` for every catalog group; this lets cosets with equal
``|t|`` share one geometry object.  For abelian peripherals the horizontal BFS
step at level ``k`` is a taxicab distance transform on the coordinate grid.
"""
from __future__ import annotations

from dataclasses import dataclass, field as dc_field
from typing import NamedTuple

import numpy as np
from scipy.ndimage import distance_transform_cdt
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import shortest_path

from .bfs import INF, DistanceField
from .groups import IDENTITY, MarkedGroup, PeripheralCoset, Word, shortlex_key
from .horoball import ceil_div, horoball_distance


class Base(NamedTuple):
    element: Word


class Horo(NamedTuple):
    coset: PeripheralCoset
    element: Word
    level: int


CuspedVertex = Base | Horo
STAR = Base(IDENTITY)


class ResourceCapError(RuntimeError):
    pass


class InconclusiveError(RuntimeError):
    """A quantity cannot be certified inside the current window."""


def depth_of(v) -> int:
    return v.level if isinstance(v, Horo) else 0


def element_of(v) -> Word:
    return v.element


# ------------------------------------------------------------ geometry

class PeripheralGeometry:
    """All elements of ``P_i`` within word length ``rho``, with fast lookup."""

    def __init__(self, group: MarkedGroup, i: int, rho: int, metric: str):
        self.group = group
        self.index = i
        self.rho = rho
        self.metric = metric
        self.abelian = group.peripheral_is_abelian(i)
        self._gens = sorted(group._check_peripheral(i))
        self.dmat = None
        if self.abelian:
            r = len(self._gens)
            axes = np.meshgrid(*([np.arange(-rho, rho + 1)] * r), indexing="ij")
            pts = np.stack([a.ravel() for a in axes], axis=1)
            norms = np.abs(pts).sum(axis=1)
            pts, norms = pts[norms <= rho], norms[norms <= rho]
            order = np.lexsort(tuple(pts[:, c] for c in range(r - 1, -1, -1)) + (norms,))
            self.coords = pts[order].astype(np.int64)
            self.lenp = norms[order].astype(np.int64)
            self.grid_shape = (2 * rho + 1,) * r
            self.grid_index = np.full(self.grid_shape, -1, dtype=np.int64)
            self.grid_index[tuple((self.coords + rho).T)] = np.arange(len(self.coords))
            self.words = None
        else:
            self.words = group.peripheral_ball(i, rho)
            self.coords = None
            self.lenp = np.array([len(w) for w in self.words], dtype=np.int64)
            self._word_index = {w: k for k, w in enumerate(self.words)}
        self.n = len(self.lenp)
        if metric == "induced":
            self.dmat = self._induced_matrix()

    def _induced_matrix(self) -> np.ndarray:
        if self.n > 20000:
            raise ResourceCapError("induced window metric limited to 20000 members")
        rows, cols = [], []
        letters = self.group.peripheral_letters(self.index)
        for a in range(self.n):
            p = self.word(a)
            for letter in letters:
                b = self.lookup(self.group.times_letter(p, letter))
                if b is not None:
                    rows.append(a)
                    cols.append(b)
        mat = csr_matrix((np.ones(len(rows)), (rows, cols)), shape=(self.n, self.n))
        dist = shortest_path(mat, unweighted=True, directed=False)
        dist[np.isinf(dist)] = 10 ** 9
        return dist.astype(np.int64)

    def word(self, a: int) -> Word:
        if self.words is not None:
            return self.words[a]
        out: list[int] = []
        for g, e in zip(self._gens, self.coords[a]):
            if e:
                out.extend([int(2 * g + (e < 0))] * int(abs(e)))
        return tuple(out)

    def lookup(self, p: Word) -> int | None:
        if self.words is not None:
            return self._word_index.get(p)
        c = self.group.peripheral_coordinates(p, self.index)
        if sum(abs(x) for x in c) > self.rho:
            return None
        a = int(self.grid_index[tuple(x + self.rho for x in c)])
        return a if a >= 0 else None

    def pdist(self, a: int, b) -> np.ndarray:
        """Peripheral distances from member ``a`` to members ``b``."""
        b = np.asarray(b, dtype=np.int64)
        if self.dmat is not None:
            return self.dmat[a, b]
        if self.abelian:
            return np.abs(self.coords[b] - self.coords[a]).sum(axis=1)
        inv = self.group.inverse(self.words[a])
        return np.array([len(self.group.multiply(inv, self.words[j])) for j in b],
                        dtype=np.int64)

    def within(self, frontier: np.ndarray, cand: np.ndarray, radius: int) -> np.ndarray:
        """Mask over ``cand``: some frontier member lies within ``radius``."""
        if len(cand) == 0 or len(frontier) == 0:
            return np.zeros(len(cand), dtype=bool)
        if self.dmat is not None:
            return (self.dmat[np.ix_(frontier, cand)] <= radius).any(axis=0)
        if self.abelian:
            if len(frontier) * len(cand) <= 400_000 or radius == 0:
                out = np.zeros(len(cand), dtype=bool)
                step = max(1, 400_000 // max(1, len(frontier)))
                fc = self.coords[frontier]
                for s in range(0, len(cand), step):
                    cc = self.coords[cand[s:s + step]]
                    d = np.abs(cc[:, None, :] - fc[None, :, :]).sum(axis=2)
                    out[s:s + step] = (d <= radius).any(axis=1)
                return out
            grid = np.ones(self.grid_shape, dtype=np.int8)
            grid[tuple((self.coords[frontier] + self.rho).T)] = 0
            dt = distance_transform_cdt(grid, metric="taxicab")
            return dt[tuple((self.coords[cand] + self.rho).T)] <= radius
        out = np.zeros(len(cand), dtype=bool)
        for a in frontier:
            out |= self.pdist(int(a), cand) <= radius
        return out


class CosetBlock:
    """One horoball's window: members ``t p`` with ``|p| <= R - |t|``."""

    def __init__(self, X: "CuspedGraph", coset: PeripheralCoset):
        self.X = X
        self.coset = coset
        self.t = coset.representative
        self.tlen = len(self.t)
        self.rho = X.R - self.tlen
        if self.rho < 0:
            raise ValueError(f"coset {coset} misses the window")
        self.geom = X._geometry(coset.index, self.rho)
        self.n = self.geom.n
        self.lens = self.tlen + self.geom.lenp
        self._tinv = X.group.inverse(self.t)
        self._words: dict[int, Word] = {}

    def element(self, a: int) -> Word:
        a = int(a)
        w = self._words.get(a)
        if w is None:
            w = self.X.group.multiply(self.t, self.geom.word(a))
            self._words[a] = w
        return w

    def index_of(self, g: Word) -> int | None:
        return self.geom.lookup(self.X.group.multiply(self._tinv, g))

    def boundary_mask(self, k: int) -> np.ndarray:
        if k >= self.X.D:
            return np.ones(self.n, dtype=bool)
        return self.lens + (1 << k) > self.X.R

    def vertex(self, a: int, k: int):
        if k == 0:
            return Base(self.element(a))
        return Horo(self.coset, self.element(a), k)


# ------------------------------------------------------------- regions

@dataclass
class Region:
    """Restriction of the vertex set used by region-limited searches.

    ``horoball``/``min_depth`` keep only one horoball's vertices of depth at
    least ``min_depth``; ``max_depth`` caps depth everywhere; ``cut`` removes
    one horoball's vertices of depth at least the given level; ``avoid`` is a
    ``(field, radius)`` pair removing every vertex that may lie within
    ``radius`` of the field's source.
    """

    horoball: PeripheralCoset | None = None
    min_depth: int = 0
    max_depth: int | None = None
    cut: tuple[PeripheralCoset, int] | None = None
    avoid: tuple[DistanceField, int] | None = None
    _cache: dict = dc_field(default_factory=dict, repr=False)

    def exact(self) -> bool:
        """True when the avoided ball is known exactly from certified values."""
        if self.avoid is None:
            return True
        fld, rho = self.avoid
        if rho < 0:
            return True
        return rho <= fld.bound and (fld.complete or rho <= fld.radius)

    def allows(self, X: "CuspedGraph", v) -> bool:
        if isinstance(v, Base):
            return self.base_ok(X, v.element)
        blk = X.block(v.coset)
        a = blk.index_of(v.element)
        mask = self.block_mask(X, blk, v.level)
        return bool(mask is None or mask[a])

    def base_ok(self, X: "CuspedGraph", g: Word) -> bool:
        if self.horoball is not None:
            if self.min_depth > 0:
                return False
            if X.group.peripheral_coset_of(g, self.horoball.index) != self.horoball:
                return False
        if self.cut is not None and self.cut[1] <= 0:
            coset = self.cut[0]
            if X.group.peripheral_coset_of(g, coset.index) == coset:
                return False
        if self.avoid is not None:
            fld, rho = self.avoid
            if fld.lower_bound(Base(g)) <= rho:
                return False
        return True

    def block_mask(self, X: "CuspedGraph", blk: CosetBlock, k: int):
        key = (blk.coset, k)
        if key in self._cache:
            return self._cache[key]
        mask = None

        def restrict(m):
            nonlocal mask
            mask = m if mask is None else mask & m

        if self.horoball is not None and (blk.coset != self.horoball or k < self.min_depth):
            restrict(np.zeros(blk.n, dtype=bool))
        if self.max_depth is not None and k > self.max_depth:
            restrict(np.zeros(blk.n, dtype=bool))
        if self.cut is not None and blk.coset == self.cut[0] and k >= self.cut[1]:
            restrict(np.zeros(blk.n, dtype=bool))
        if self.avoid is not None:
            fld, rho = self.avoid
            restrict(fld.lower_bound_array(blk, k) > rho)
        self._cache[key] = mask
        return mask


# ------------------------------------------------------------ the space

class CuspedGraph:
    """Lazy truncated cusped space; immutable apart from memo caches."""

    def __init__(self, group: MarkedGroup, R: int, D: int,
                 level_metric: str = "intrinsic", max_vertices: int = 5_000_000):
        if R < 1 or D < 1:
            raise ValueError("need R >= 1 and D >= 1")
        if level_metric not in ("intrinsic", "induced"):
            raise ValueError("level_metric must be 'intrinsic' or 'induced'")
        self.group = group
        self.R = R
        self.D = D
        self.level_metric = level_metric
        self.max_vertices = max_vertices
        self._geoms: dict[tuple[int, int], PeripheralGeometry] = {}
        self._blocks: dict[PeripheralCoset, CosetBlock] = {}

    def __repr__(self) -> str:
        return f"CuspedGraph({self.group!r}, R={self.R}, D={self.D})"

    def describe(self) -> dict:
        return {"group": self.group.describe(), "R": self.R, "D": self.D,
                "level_metric": self.level_metric}

    # -- structure
    def _geometry(self, i: int, rho: int) -> PeripheralGeometry:
        key = (i, rho)
        if key not in self._geoms:
            self._geoms[key] = PeripheralGeometry(self.group, i, rho, self.level_metric)
        return self._geoms[key]

    def block(self, coset: PeripheralCoset) -> CosetBlock:
        blk = self._blocks.get(coset)
        if blk is None:
            blk = CosetBlock(self, coset)
            self._blocks[coset] = blk
        return blk

    def cosets_of(self, g: Word) -> list[PeripheralCoset]:
        return [self.group.peripheral_coset_of(g, i)
                for i in range(len(self.group.peripherals))]

    def contains(self, v) -> bool:
        if isinstance(v, Base):
            return len(v.element) <= self.R
        if not isinstance(v, Horo) or not (1 <= v.level <= self.D):
            return False
        if len(v.element) > self.R:
            return False
        return self.group.peripheral_coset_of(v.element, v.coset.index) == v.coset

    __contains__ = contains

    def is_boundary(self, v) -> bool:
        if isinstance(v, Base):
            return len(v.element) >= self.R
        return v.level >= self.D or len(v.element) + (1 << v.level) > self.R

    def peripheral_distance(self, coset: PeripheralCoset, x: Word, y: Word) -> int:
        if self.level_metric == "induced":
            blk = self.block(coset)
            return int(blk.geom.pdist(blk.index_of(x), [blk.index_of(y)])[0])
        return self.group.distance(x, y)

    def level_distance(self, x, y) -> int:
        """Distance inside the level subgraph containing both vertices."""
        kx, ky = depth_of(x), depth_of(y)
        if kx != ky:
            raise ValueError("level distance needs vertices of equal depth")
        coset = x.coset if isinstance(x, Horo) else (y.coset if isinstance(y, Horo) else None)
        if coset is None:
            raise ValueError("give a coset for level-0 distances via level_distance_in")
        return ceil_div(self.peripheral_distance(coset, x.element, y.element), 1 << kx)

    def level_distance_in(self, coset: PeripheralCoset, m: int, x: Word, y: Word) -> int:
        return ceil_div(self.peripheral_distance(coset, x, y), 1 << m)

    def horoball_distance(self, coset: PeripheralCoset, x, y) -> tuple[int, int]:
        """Distance inside the horoball (capped at D) and the optimal apex."""
        n = self.peripheral_distance(coset, x.element, y.element)
        return horoball_distance(depth_of(x), depth_of(y), n, cap=self.D)

    def horo(self, coset: PeripheralCoset, g: Word, level: int):
        return Base(g) if level == 0 else Horo(coset, g, level)

    def adjacent(self, u, v) -> bool:
        if not (self.contains(u) and self.contains(v)) or u == v:
            return False
        if isinstance(u, Base) and isinstance(v, Base):
            return self.group.distance(u.element, v.element) == 1
        if isinstance(u, Base):
            u, v = v, u
        if isinstance(v, Base):
            return u.level == 1 and u.element == v.element
        if u.coset != v.coset:
            return False
        if u.element == v.element:
            return abs(u.level - v.level) == 1
        if u.level != v.level:
            return False
        d = self.peripheral_distance(u.coset, u.element, v.element)
        return 0 < d <= (1 << u.level)

    def neighbors(self, v) -> list:
        """Full neighbour list; horizontal degree grows like 4**k, so keep k small."""
        out = []
        if isinstance(v, Base):
            g = v.element
            for y in self.group.neighbors(g):
                if len(y) <= self.R:
                    out.append(Base(y))
            for coset in self.cosets_of(g):
                out.append(Horo(coset, g, 1))
            return out
        blk = self.block(v.coset)
        a = blk.index_of(v.element)
        out.append(blk.vertex(a, v.level - 1))
        if v.level < self.D:
            out.append(Horo(v.coset, v.element, v.level + 1))
        d = blk.geom.pdist(a, np.arange(blk.n))
        for b in np.nonzero((d > 0) & (d <= (1 << v.level)))[0]:
            out.append(Horo(v.coset, blk.element(b), v.level))
        return out

    def level_vertices(self, coset: PeripheralCoset, m: int) -> list:
        blk = self.block(coset)
        return [blk.vertex(a, m) for a in range(blk.n)]

    def level_ball(self, z, n: int, coset: PeripheralCoset | None = None) -> list:
        """Vertices of z's level within level distance ``n`` of z."""
        coset = z.coset if isinstance(z, Horo) else coset
        if coset is None:
            raise ValueError("level-0 balls need the horoball's coset")
        m = depth_of(z)
        blk = self.block(coset)
        a = blk.index_of(z.element)
        d = blk.geom.pdist(a, np.arange(blk.n))
        hits = np.nonzero(d <= n << m)[0]
        return [blk.vertex(b, m) for b in hits]

    def enumerate_cosets(self, i: int) -> list[PeripheralCoset]:
        seen = {self.group.peripheral_coset_of(g, i)
                for g in self.group.enumerate_ball(IDENTITY, self.R, self.max_vertices)}
        return sorted(seen, key=lambda c: shortlex_key(c.representative))

    def vertices(self) -> list:
        """Materialize the whole window (small instances only)."""
        ball = sorted(self.group.enumerate_ball(IDENTITY, self.R, self.max_vertices),
                      key=shortlex_key)
        out: list = [Base(g) for g in ball]
        for i in range(len(self.group.peripherals)):
            for coset in self.enumerate_cosets(i):
                blk = self.block(coset)
                for k in range(1, self.D + 1):
                    out.extend(Horo(coset, blk.element(a), k) for a in range(blk.n))
                if len(out) > self.max_vertices:
                    raise ResourceCapError("window exceeds the vertex cap")
        return out

    # -- search
    def certified_bfs(self, source, horizon: int | None = None,
                      region: Region | None = None, stop_at_bound: bool | None = None,
                      max_vertices: int | None = None) -> "CuspedField":
        return certified_bfs(self, source, horizon, region, stop_at_bound, max_vertices)

    # -- export
    def tag(self, v) -> str:
        word = self.group.format(v.element, ".") or "e"
        if isinstance(v, Base):
            return f"B:{word}"
        rep = self.group.format(v.coset.representative, ".") or "e"
        return f"H:{v.coset.index}/{rep}:{v.level}:{word}"

    def edges(self) -> list[tuple]:
        verts = self.vertices()
        order = {v: i for i, v in enumerate(verts)}
        out = []
        for v in verts:
            for w in self.neighbors(v):
                if order[v] < order[w]:
                    out.append((v, w))
        return out

    def export_edges(self, path=None) -> str:
        text = "".join(f"{self.tag(u)} {self.tag(v)}\n" for u, v in self.edges())
        if path is not None:
            with open(path, "w") as fh:
                fh.write(text)
        return text

    def export_dot(self, path=None, max_edges: int = 5000) -> str:
        edges = self.edges()
        if len(edges) > max_edges:
            raise ValueError(f"{len(edges)} edges exceed the DOT export limit of {max_edges}")
        lines = ["graph cusped {"]
        lines += [f'  "{self.tag(u)}" -- "{self.tag(v)}";' for u, v in edges]
        lines.append("}")
        text = "\n".join(lines) + "\n"
        if path is not None:
            with open(path, "w") as fh:
                fh.write(text)
        return text


def build_cusped(group: MarkedGroup, R: int, D: int, **kw) -> CuspedGraph:
    return CuspedGraph(group, R, D, **kw)


# -------------------------------------------------------- distance field

class CuspedField(DistanceField):
    """Distance field stored as a base dict plus per-block level arrays."""

    def __init__(self, X: CuspedGraph, source, base: dict, arrays: dict,
                 bound, radius: int, complete: bool, region: Region | None):
        super().__init__(source, {}, bound, radius, complete)
        self.X = X
        self.base = base
        self.arrays = arrays
        self.region = region
        self._level0: dict = {}
        self._dict = None

    def value(self, v):
        if isinstance(v, Base):
            return self.base.get(v.element, INF)
        levels = self.arrays.get(v.coset)
        if levels is None or v.level not in levels:
            return INF
        a = self.X.block(v.coset).index_of(v.element)
        if a is None:
            return INF
        d = int(levels[v.level][a])
        return d if d >= 0 else INF

    @property
    def values(self) -> dict:
        if self._dict is None:
            out = {Base(g): d for g, d in self.base.items()}
            for coset, levels in self.arrays.items():
                blk = self.X.block(coset)
                for k, arr in levels.items():
                    for a in np.nonzero(arr >= 0)[0]:
                        out[Horo(coset, blk.element(a), k)] = int(arr[a])
            self._dict = out
        return self._dict

    def __len__(self) -> int:
        return len(self.base) + sum(int((arr >= 0).sum()) for lv in self.arrays.values()
                                    for arr in lv.values())

    def level_array(self, blk: CosetBlock, k: int) -> np.ndarray:
        """Values at level k of a block, -1 where unknown."""
        if k > 0:
            arr = self.arrays.get(blk.coset, {}).get(k)
            return arr if arr is not None else np.full(blk.n, -1, dtype=np.int64)
        if blk.coset not in self._level0:
            arr = np.full(blk.n, -1, dtype=np.int64)
            if len(self.base) <= blk.n:
                for g, d in self.base.items():
                    if self.X.group.peripheral_coset_of(g, blk.coset.index) == blk.coset:
                        a = blk.index_of(g)
                        if a is not None:
                            arr[a] = d
            else:
                for a in range(blk.n):
                    d = self.base.get(blk.element(a))
                    if d is not None:
                        arr[a] = d
            self._level0[blk.coset] = arr
        return self._level0[blk.coset]

    def lower_bound_array(self, blk: CosetBlock, k: int) -> np.ndarray:
        arr = self.level_array(blk, k)
        floor = self.floor_outside()
        floor = np.iinfo(np.int64).max if floor is INF else floor
        ok = (arr >= 0) & (arr <= (self.bound if self.bound is not INF else np.iinfo(np.int64).max))
        return np.where(ok, arr, floor)

    def predecessor(self, v):
        """A neighbour one step closer to the source (lowest index first)."""
        d = self.value(v)
        if d is INF or d == 0:
            return None
        X = self.X
        if isinstance(v, Base):
            g = v.element
            for y in X.group.neighbors(g):
                if self.base.get(y) == d - 1:
                    return Base(y)
            for coset in X.cosets_of(g):
                lv = self.arrays.get(coset, {})
                if 1 in lv:
                    a = X.block(coset).index_of(g)
                    if lv[1][a] == d - 1:
                        return Horo(coset, g, 1)
            return None
        blk = X.block(v.coset)
        a = blk.index_of(v.element)
        lv = self.arrays.get(v.coset, {})
        k = v.level
        if k == 1:
            if self.base.get(v.element) == d - 1:
                return Base(v.element)
        elif k - 1 in lv and lv[k - 1][a] == d - 1:
            return Horo(v.coset, v.element, k - 1)
        if k + 1 in lv and lv[k + 1][a] == d - 1:
            return Horo(v.coset, v.element, k + 1)
        arr = lv.get(k)
        if arr is not None:
            cand = np.nonzero(arr == d - 1)[0]
            if len(cand):
                near = blk.geom.within(np.array([a]), cand, 1 << k)
                hits = cand[near]
                if len(hits):
                    return Horo(v.coset, blk.element(hits[0]), k)
        return None

    def path_to(self, v) -> list:
        if self.value(v) is INF:
            raise KeyError(f"{v!r} was not reached")
        path = [v]
        while self.value(path[-1]) > 0:
            p = self.predecessor(path[-1])
            if p is None:
                raise RuntimeError("broken predecessor chain")
            path.append(p)
        return path[::-1]


def certified_bfs(X: CuspedGraph, source, horizon: int | None = None,
                  region: Region | None = None, stop_at_bound: bool | None = None,
                  max_vertices: int | None = None) -> CuspedField:
    """Layered BFS from ``source`` through the window, optionally restricted.

    Without a horizon the search stops once the layer of the first boundary
    vertex is complete, which already yields every certified value.
    """
    if not X.contains(source):
        raise ValueError(f"source {source!r} is not in the window")
    if stop_at_bound is None:
        stop_at_bound = horizon is None
    cap = max_vertices or X.max_vertices
    group, R, D = X.group, X.R, X.D
    base: dict[Word, int] = {}
    arrays: dict[PeripheralCoset, dict[int, np.ndarray]] = {}
    bound = INF
    count = 0

    def level_arr(coset, k) -> np.ndarray:
        lv = arrays.setdefault(coset, {})
        arr = lv.get(k)
        if arr is None:
            arr = np.full(X.block(coset).n, -1, dtype=np.int64)
            lv[k] = arr
        return arr

    def mask(blk, k):
        return None if region is None else region.block_mask(X, blk, k)

    frontier_base: list[Word] = []
    frontier_horo: dict[tuple[PeripheralCoset, int], list[np.ndarray]] = {}

    def push(coset, k, idx):
        frontier_horo.setdefault((coset, k), []).append(idx)

    if isinstance(source, Base):
        base[source.element] = 0
        frontier_base.append(source.element)
        if X.is_boundary(source):
            bound = 0
    else:
        blk = X.block(source.coset)
        a = blk.index_of(source.element)
        level_arr(source.coset, source.level)[a] = 0
        push(source.coset, source.level, np.array([a]))
        if X.is_boundary(source):
            bound = 0
    count = 1
    depth = 0

    def settle(coset, k, idx, d):
        """Record newly discovered block indices; returns them."""
        nonlocal bound, count
        if len(idx) == 0:
            return
        blk = X.block(coset)
        level_arr(coset, k)[idx] = d
        count += len(idx)
        if bound is INF or d < bound:
            if blk.boundary_mask(k)[idx].any():
                bound = d if bound is INF else min(bound, d)
        push(coset, k, idx)

    while frontier_base or frontier_horo:
        if horizon is not None and depth >= horizon:
            return CuspedField(X, source, base, arrays, bound, depth, False, region)
        if stop_at_bound and bound is not INF and depth >= bound:
            return CuspedField(X, source, base, arrays, bound, depth, False, region)
        if count > cap:
            return CuspedField(X, source, base, arrays, bound, depth, False, region)
        d = depth + 1
        cur_base, frontier_base = frontier_base, []
        cur_horo, frontier_horo = frontier_horo, {}

        def discover_base(y: Word):
            nonlocal bound, count
            if y in base or len(y) > R:
                return
            if region is not None and not region.base_ok(X, y):
                return
            base[y] = d
            count += 1
            frontier_base.append(y)
            if len(y) >= R and (bound is INF or d < bound):
                bound = d

        for g in cur_base:
            for y in group.neighbors(g):
                discover_base(y)
            for coset in X.cosets_of(g):
                blk = X.block(coset)
                a = blk.index_of(g)
                arr = level_arr(coset, 1)
                if arr[a] < 0:
                    m = mask(blk, 1)
                    if m is None or m[a]:
                        settle(coset, 1, np.array([a]), d)

        for (coset, k), parts in cur_horo.items():
            idx = np.unique(np.concatenate(parts))
            blk = X.block(coset)
            # vertical down
            if k == 1:
                for a in idx:
                    discover_base(blk.element(a))
            else:
                arr = level_arr(coset, k - 1)
                m = mask(blk, k - 1)
                new = idx[arr[idx] < 0]
                if m is not None:
                    new = new[m[new]]
                settle(coset, k - 1, new, d)
            # vertical up
            if k < D:
                arr = level_arr(coset, k + 1)
                m = mask(blk, k + 1)
                new = idx[arr[idx] < 0]
                if m is not None:
                    new = new[m[new]]
                settle(coset, k + 1, new, d)
            # horizontal
            arr = level_arr(coset, k)
            free = arr < 0
            m = mask(blk, k)
            if m is not None:
                free &= m
            cand = np.nonzero(free)[0]
            if len(cand):
                hit = blk.geom.within(idx, cand, 1 << k)
                settle(coset, k, cand[hit], d)
        depth = d
    return CuspedField(X, source, base, arrays, bound, depth, True, region)


# -------------------------------------------------------- level geodesics

def peripheral_geodesic(X: CuspedGraph, coset: PeripheralCoset, x: Word, y: Word) -> list[Word]:
    """Geodesic of the coset graph from x to y that stays inside the window.

    For abelian peripherals the staircase takes every move toward the origin
    of the coset before any move away from it, so word length first falls and
    then rises and never leaves the window.
    """
    blk = X.block(coset)
    geom = blk.geom
    a, b = blk.index_of(x), blk.index_of(y)
    if a is None or b is None:
        raise ValueError("both endpoints must lie in the coset window")
    if geom.dmat is not None:
        letters = X.group.peripheral_letters(coset.index)
        path = [a]
        while path[-1] != b:
            cur = path[-1]
            p = geom.word(cur)
            for letter in letters:
                nxt = geom.lookup(X.group.times_letter(p, letter))
                if nxt is not None and geom.dmat[nxt, b] == geom.dmat[cur, b] - 1:
                    path.append(nxt)
                    break
            else:
                raise RuntimeError("induced window metric has no descent step")
        return [blk.element(i) for i in path]
    if geom.abelian:
        cur = geom.coords[a].copy()
        target = geom.coords[b]
        steps: list[tuple[int, int]] = []
        for i in range(len(cur)):
            c, goal = int(cur[i]), int(target[i])
            stop = max(goal, 0) if c > 0 else min(goal, 0)
            if (c > 0 and goal < c) or (c < 0 and goal > c):
                sgn = -1 if c > 0 else 1
                steps += [(i, sgn)] * abs(stop - c)
        for i in range(len(cur)):
            c = int(cur[i])
            goal = int(target[i])
            start = c
            if (c > 0 and goal < c) or (c < 0 and goal > c):
                start = max(goal, 0) if c > 0 else min(goal, 0)
            if goal != start:
                sgn = 1 if goal > start else -1
                steps += [(i, sgn)] * abs(goal - start)
        out = [x]
        for i, sgn in steps:
            cur[i] += sgn
            idx = int(geom.grid_index[tuple(cur + geom.rho)])
            out.append(blk.element(idx))
        return out
    p, q = geom.words[a], geom.words[b]
    w = X.group.multiply(X.group.inverse(p), q)
    out = [x]
    cur = p
    for letter in w:
        cur = X.group.times_letter(cur, letter)
        out.append(X.group.multiply(blk.t, cur))
    return out


def level_path(X: CuspedGraph, coset: PeripheralCoset, m: int, x: Word, y: Word) -> list:
    """Shortest path in level m of a horoball between the vertices over x and y."""
    line = peripheral_geodesic(X, coset, x, y)
    n = len(line) - 1
    step = 1 << m
    picks = list(range(0, n, step)) + [n]
    return [X.horo(coset, line[i], m) for i in picks]


def closest_level_vertex(X: CuspedGraph, coset: PeripheralCoset, m: int,
                         field: DistanceField):
    """Vertex of level m of the horoball nearest the field's source.

    Returns ``(vertex, distance)``; ties go to the shortlex-least element.
    Raises ``InconclusiveError`` when the minimum is not certified.
    """
    blk = X.block(coset)
    arr = field.level_array(blk, m)
    seen = np.nonzero(arr >= 0)[0]
    if len(seen) == 0:
        raise InconclusiveError(f"level {m} of {coset} was not reached")
    best = int(arr[seen].min())
    if field.bound is not INF and best > field.bound:
        raise InconclusiveError(f"closest level-{m} distance {best} exceeds certified bound {field.bound}")
    if not field.complete and best > field.radius:
        raise InconclusiveError("search horizon too small")
    ties = seen[arr[seen] == best]
    elem = min((blk.element(a) for a in ties), key=shortlex_key)
    return X.horo(coset, elem, m), best

"""Path surgery inside horoballs and the far-out path conditions.

Excursions are paths in the part of one horoball at depth at least ``dbar``
that touch level ``dbar`` only at their ends.  They are either projected to
that level or rerouted around a level ball, and every avoidance claim is
checked against certified distance intervals, never against how the
replacement was built.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import shortest_path

from .bfs import INF, DistanceField
from .cusped import (STAR, Base, CuspedGraph, Horo, InconclusiveError, Region,
                     closest_level_vertex, depth_of, level_path)
from .groups import MarkedGroup, PeripheralCoset, Word
from .report import LemmaReport

HORIZONTAL = "horizontal"
VERTICAL = "vertical"
PLAIN = "plain"
HAT = "hat"

_BIG = np.iinfo(np.int64).max // 4


class CounterexampleError(RuntimeError):
    """A construction the lemmas guarantee provably does not exist."""


class AnnulusDisconnectedError(CounterexampleError):
    pass


# ------------------------------------------------------------ edge paths

class EdgePath:
    """Nonempty vertex sequence with consecutive vertices adjacent."""

    def __init__(self, vertices: Iterable, graph: CuspedGraph | None = None):
        self.vertices = tuple(vertices)
        if not self.vertices:
            raise ValueError("an edge path needs at least one vertex")
        if graph is not None:
            for i, (u, v) in enumerate(zip(self.vertices, self.vertices[1:])):
                if not graph.adjacent(u, v):
                    raise ValueError(f"vertices {i} and {i + 1} are not adjacent: {u!r}, {v!r}")

    def __len__(self) -> int:
        return len(self.vertices) - 1

    @property
    def length(self) -> int:
        return len(self.vertices) - 1

    def __iter__(self):
        return iter(self.vertices)

    def __getitem__(self, i):
        return self.vertices[i]

    def __eq__(self, other) -> bool:
        return isinstance(other, EdgePath) and other.vertices == self.vertices

    def __hash__(self) -> int:
        return hash(self.vertices)

    def __repr__(self) -> str:
        return f"EdgePath(length={self.length}, depth={self.depth_range()})"

    @property
    def start(self):
        return self.vertices[0]

    @property
    def end(self):
        return self.vertices[-1]

    def edge_classes(self) -> list[str]:
        out = []
        for u, v in zip(self.vertices, self.vertices[1:]):
            du, dv = depth_of(u), depth_of(v)
            if abs(du - dv) > 1:
                raise ValueError("depth jumps by more than one along an edge")
            out.append(HORIZONTAL if du == dv else VERTICAL)
        return out

    def depth_range(self) -> tuple[int, int]:
        ds = [depth_of(v) for v in self.vertices]
        return min(ds), max(ds)

    def horizontal_edges(self) -> list[tuple]:
        return [(u, v) for (u, v), c in zip(zip(self.vertices, self.vertices[1:]),
                                            self.edge_classes()) if c == HORIZONTAL]

    def segments(self) -> list[tuple[str, "EdgePath"]]:
        """Maximal horizontal and vertical runs, in order."""
        classes = self.edge_classes()
        out: list[tuple[str, EdgePath]] = []
        start = 0
        for i in range(1, len(classes) + 1):
            if i == len(classes) or classes[i] != classes[start]:
                out.append((classes[start], EdgePath(self.vertices[start:i + 1])))
                start = i
        return out

    def reversed(self) -> "EdgePath":
        return EdgePath(self.vertices[::-1])

    def concat(self, other: "EdgePath") -> "EdgePath":
        if other.start != self.end:
            raise ValueError("paths do not meet")
        return EdgePath(self.vertices + other.vertices[1:])

    def to_edge_list(self, X: CuspedGraph) -> str:
        return "".join(f"{X.tag(u)} {X.tag(v)}\n" for u, v in zip(self.vertices, self.vertices[1:]))


# ------------------------------------------------------------ distance intervals

class FieldBounds:
    """Per-vertex lower and upper bounds read off one distance field."""

    def __init__(self, X: CuspedGraph, fld: DistanceField):
        self.X = X
        self.field = fld
        self._lb: dict = {}
        self._ub: dict = {}

    def _arrays(self, coset, k):
        key = (coset, k)
        if key not in self._lb:
            blk = self.X.block(coset)
            vals = self.field.level_array(blk, k)
            self._lb[key] = self.field.lower_bound_array(blk, k)
            self._ub[key] = np.where(vals >= 0, vals, _BIG)
        return self._lb[key], self._ub[key]

    def lb(self, v) -> int:
        if isinstance(v, Base):
            val = self.field.lower_bound(v)
            return _BIG if val is INF else int(val)
        a = self.X.block(v.coset).index_of(v.element)
        return int(self._arrays(v.coset, v.level)[0][a])

    def ub(self, v) -> int:
        if isinstance(v, Base):
            val = self.field.upper_bound(v)
            return _BIG if val is INF else int(val)
        a = self.X.block(v.coset).index_of(v.element)
        return int(self._arrays(v.coset, v.level)[1][a])

    def level(self, coset, k):
        """(lower, upper) arrays over one level of a horoball."""
        return self._arrays(coset, k)


class HoroballFrame:
    """Data shared by every excursion in one horoball at one level.

    Holds the certified distance from the identity, the closest level vertex
    ``z`` with its exact distance, and interval bounds for ``d(., z)`` that
    combine the field from ``z`` with the triangle inequality.
    """

    def __init__(self, X: CuspedGraph, coset: PeripheralCoset, dbar: int, delta: int,
                 star: DistanceField | None = None, star_bounds: FieldBounds | None = None):
        if dbar < 1:
            raise ValueError("excursions need dbar >= 1")
        self.X, self.coset, self.dbar, self.delta = X, coset, dbar, delta
        self.star = star if star is not None else X.certified_bfs(STAR)
        self.sb = star_bounds or FieldBounds(X, self.star)
        self.z, self.d_star_z = closest_level_vertex(X, coset, dbar, self.star)
        self.zfield = X.certified_bfs(self.z)
        self.zb = FieldBounds(X, self.zfield)
        self.blk = X.block(coset)
        self.z_index = self.blk.index_of(self.z.element)

    def lb_star(self, v) -> int:
        return self.sb.lb(v)

    def ub_star(self, v) -> int:
        return self.sb.ub(v)

    def lb_z(self, v) -> int:
        return max(self.zb.lb(v), self.sb.lb(v) - self.d_star_z)

    def ub_z(self, v) -> int:
        return min(self.zb.ub(v), self.sb.ub(v) + self.d_star_z)

    def largest_r(self, psi: EdgePath) -> int:
        """Largest r with psi provably outside B_r(*)."""
        return min(self.lb_star(v) for v in psi) - 1


# ------------------------------------------------------------ projection

def _excursion_coset(psi: EdgePath, k: int) -> PeripheralCoset:
    cosets = {v.coset for v in psi if isinstance(v, Horo)}
    if len(cosets) != 1 or any(depth_of(v) < k for v in psi):
        raise ValueError(f"path must lie in one horoball at depth >= {k}")
    return next(iter(cosets))


def project_to_level(X: CuspedGraph, psi: EdgePath, k: int) -> EdgePath:
    """Drop horizontal-edge endpoints to level k and join the drops by level geodesics."""
    coset = _excursion_coset(psi, k)
    out = [X.horo(coset, psi.start.element, k)]
    for u, v in psi.horizontal_edges():
        seg = level_path(X, coset, k, u.element, v.element)
        if seg[0] != out[-1]:
            raise RuntimeError("projection lost track of the drop point")
        out.extend(seg[1:])
    if out[-1].element != psi.end.element:
        raise RuntimeError("projection does not end below the path's end")
    return EdgePath(out)


def projection_witnesses(X: CuspedGraph, psi: EdgePath, gamma: EdgePath) -> list:
    """For each vertex of gamma, a path vertex whose level passes within one
    horizontal unit of its vertical line, or ``None``.

    Candidates are the endpoints of horizontal edges of psi together with the
    two ends of psi, whose vertical lines contain the ends of gamma.
    """
    k = depth_of(gamma.start)
    coset = _excursion_coset(psi, k)
    blk = X.block(coset)
    cands = []
    for u, v in psi.horizontal_edges():
        cands += [u, v]
    cands += [psi.start, psi.end]
    cands = list(dict.fromkeys(cands))
    idx = np.array([blk.index_of(c.element) for c in cands])
    reach = np.array([1 << c.level for c in cands])
    levels = np.array([c.level for c in cands])
    out = []
    for p in gamma:
        a = blk.index_of(p.element)
        d = blk.geom.pdist(a, idx)
        ok = np.nonzero((d <= reach) & (levels >= depth_of(p)))[0]
        out.append(cands[int(ok[0])] if len(ok) else None)
    return out


# ------------------------------------------------------------ escape rays

def escape_ray(g: MarkedGroup, x: Word, r: int, budget: int,
               check_precondition: bool = True) -> list[Word]:
    """Geodesic segment of ``budget`` edges from x avoiding B_r(identity).

    The line through x is the translate of the axis ``a^n``; of its two
    directions the first that stays outside B_r is returned.  Both failing
    when ``|x| >= 2r + 1`` would contradict the dead-end lemma.
    """
    x = g.normal_form(x)
    if check_precondition and g.length(x) < 2 * r + 1:
        raise ValueError(f"|x| = {g.length(x)} must be at least 2r + 1 = {2 * r + 1}")
    axis = g.axis_letter()
    for letter in (axis, axis ^ 1):
        ray = [x]
        for _ in range(budget):
            ray.append(g.times_letter(ray[-1], letter))
        if all(g.length(p) > r for p in ray) and all(
                g.distance(x, p) == i for i, p in enumerate(ray)):
            return ray
    raise CounterexampleError(f"both axis directions through {g.format(x)} enter B_{r}")


# ------------------------------------------------------------ annulus routing

def _level_bfs(geom, start: int, allowed: np.ndarray, reach: int,
               target: int | None = None) -> np.ndarray:
    """Hop distances in one level restricted to ``allowed`` members."""
    dist = np.full(geom.n, -1, dtype=np.int64)
    dist[start] = 0
    frontier = np.array([start])
    d = 0
    while len(frontier):
        if target is not None and dist[target] >= 0:
            break
        cand = np.nonzero(allowed & (dist < 0))[0]
        hit = cand[geom.within(frontier, cand, reach)]
        d += 1
        dist[hit] = d
        frontier = hit
    return dist


def annulus_connect(X: CuspedGraph, coset: PeripheralCoset, level: int, x: Word, y: Word,
                    z: Word, inner: int, outer: int | None = None, slack: int = 4) -> EdgePath:
    """Shortest level path from x to y missing the level ball of radius inner // 2 about z.

    With ``outer`` the search is confined to the level ball of radius
    ``outer + slack`` about z, so the answer does not depend on the window.
    """
    blk = X.block(coset)
    geom = blk.geom
    a, b, c = blk.index_of(x), blk.index_of(y), blk.index_of(z)
    if a is None or b is None or c is None:
        raise ValueError("x, y and z must lie in the horoball's window")
    unit = 1 << level
    dz = geom.pdist(c, np.arange(blk.n))
    hole = (inner // 2) * unit
    if dz[a] <= hole or dz[b] <= hole:
        raise ValueError("endpoints lie inside the avoided level ball")
    allowed = dz > hole
    confined = outer is not None
    if confined:
        limit = (outer + slack) * unit
        if dz[a] > limit or dz[b] > limit:
            raise ValueError("endpoints lie outside the search ball")
        allowed &= dz <= limit
        if blk.lens[c] + limit > X.R:
            confined = False  # the window clips the search ball
    dist = _level_bfs(geom, a, allowed, unit, target=b)
    if dist[b] < 0:
        if confined:
            raise AnnulusDisconnectedError("level annulus is disconnected")
        raise InconclusiveError("no annulus path inside the window")
    # walk back along strictly decreasing hop counts, lowest index first
    path = [b]
    while path[-1] != a:
        cur = path[-1]
        prev = np.nonzero(dist == dist[cur] - 1)[0]
        near = prev[geom.pdist(cur, prev) <= unit]
        path.append(int(near[0]))
    return EdgePath(blk.vertex(i, level) for i in reversed(path))


# ------------------------------------------------------------ excursion lemmas

@dataclass
class Excursion:
    psi: EdgePath
    r: int
    coset: PeripheralCoset

    @property
    def L(self) -> int:
        return self.psi.length

    @property
    def max_depth(self) -> int:
        return self.psi.depth_range()[1]


def _check_excursion(frame: HoroballFrame, psi: EdgePath, r: int) -> None:
    d = frame.dbar
    if depth_of(psi.start) != d or depth_of(psi.end) != d:
        raise ValueError("excursion must start and end at level dbar")
    if any(depth_of(v) == d for v in psi.vertices[1:-1]):
        raise ValueError("excursion meets level dbar away from its ends")
    _excursion_coset(psi, d)
    if any(frame.lb_star(v) <= r for v in psi):
        raise InconclusiveError("path not provably outside B_r(*)")


def route(frame: HoroballFrame, psi: EdgePath) -> str:
    """'casen1' when every vertex is provably beyond L+2 of z, 'casen2' when
    some vertex is provably within L+2, else 'skip'."""
    bar = psi.length + 2
    if all(frame.lb_z(v) > bar for v in psi):
        return "casen1"
    if any(frame.ub_z(v) <= bar for v in psi):
        return "casen2"
    return "skip"


def _projection_report(lemma: str, frame: HoroballFrame, psi: EdgePath, r: int,
                       twice_bar: int, rep: LemmaReport) -> LemmaReport:
    """Shared conclusion check: gamma beyond the bar from z and outside B_{r-2delta-1}."""
    X, delta = frame.X, frame.delta
    gamma = project_to_level(X, psi, frame.dbar)
    radius = r - (2 * delta + 1)
    decided = True
    for p in gamma:
        lz, uz = frame.lb_z(p), frame.ub_z(p)
        ls, us = frame.lb_star(p), frame.ub_star(p)
        if 2 * uz <= twice_bar:
            rep.add_violation(p=p, clause="distance to z", upper=uz, twice_bar=twice_bar)
        elif us <= radius:
            rep.add_violation(p=p, clause="avoidance", upper=us, radius=radius)
        elif 2 * lz <= twice_bar or ls <= radius:
            decided = False
    if decided and not rep.violation_count:
        rep.pairs_checked += 1
        margin = min(frame.lb_star(p) for p in gamma) - radius
        rep.observe_max("negated_min_margin", -margin)
    elif not rep.violation_count:
        rep.pairs_skipped_uncertified += 1
    rep.observe_max("projection_length", gamma.length)
    return rep


def casen1_check(frame: HoroballFrame, psi: EdgePath, r: int | None = None) -> LemmaReport:
    """Projection stays beyond L+2 of z and outside B_{r-2delta-1}(*)."""
    rep = LemmaReport("casen1", frame.X.describe(), frame.delta)
    r = frame.largest_r(psi) if r is None else r
    _check_excursion(frame, psi, r)
    if psi.start == psi.end:
        raise ValueError("casen1 needs distinct endpoints")
    bar = psi.length + 2
    if not all(frame.lb_z(v) > bar for v in psi):
        raise InconclusiveError("hypothesis d(v, z) > L + 2 not certified; route to casen2")
    return _projection_report("casen1", frame, psi, r, 2 * bar, rep)


def case1_check(frame: HoroballFrame, psi: EdgePath, r: int | None = None) -> LemmaReport:
    """Depth version: the bar is L - dbar/2 + 2 with L the deepest level, in doubled integers."""
    rep = LemmaReport("case1", frame.X.describe(), frame.delta)
    r = frame.largest_r(psi) if r is None else r
    _check_excursion(frame, psi, r)
    if psi.start == psi.end:
        raise ValueError("case1 needs distinct endpoints")
    twice_bar = 2 * psi.depth_range()[1] - frame.dbar + 4
    if not all(2 * frame.lb_z(v) > twice_bar for v in psi):
        raise InconclusiveError("depth hypothesis not certified")
    return _projection_report("case1", frame, psi, r, twice_bar, rep)


def case1_hypothesis(frame: HoroballFrame, psi: EdgePath) -> bool | None:
    twice_bar = 2 * psi.depth_range()[1] - frame.dbar + 4
    if all(2 * frame.lb_z(v) > twice_bar for v in psi):
        return True
    if any(2 * frame.ub_z(v) <= twice_bar for v in psi):
        return False
    return None


def casen2_inner(k: int) -> int:
    """Annulus inner radius 2**ceil(k/2); the avoided ball has radius inner // 2."""
    return 1 << ((k + 1) // 2)


def casen2_replace(frame: HoroballFrame, psi: EdgePath, r: int | None = None,
                   outer: int | None = None) -> tuple[EdgePath, int]:
    """Level-dbar path from x to y built as in the close case; returns it with its length."""
    r = frame.largest_r(psi) if r is None else r
    _check_excursion(frame, psi, r)
    X, d = frame.X, frame.dbar
    if psi.start == psi.end:
        return EdgePath([psi.start]), 0
    k = r - frame.d_star_z
    if k < 0:
        gamma = project_to_level(X, psi, d)
        return gamma, gamma.length
    gamma = annulus_connect(X, frame.coset, d, psi.start.element, psi.end.element,
                            frame.z.element, casen2_inner(k), outer)
    return gamma, gamma.length


def avoidance_report(lemma: str, frame: HoroballFrame, path: EdgePath, radius: int,
                     rep: LemmaReport | None = None) -> LemmaReport:
    """Count one instance: every vertex provably outside B_radius(*)."""
    rep = rep or LemmaReport(lemma, frame.X.describe(), frame.delta)
    lows = [frame.lb_star(p) for p in path]
    highs = [frame.ub_star(p) for p in path]
    bad = [p for p, u in zip(path, highs) if u <= radius]
    if bad:
        rep.add_violation(p=bad[0], radius=radius, upper=frame.ub_star(bad[0]))
    elif min(lows) > radius:
        rep.pairs_checked += 1
        rep.observe_max("negated_min_margin", radius - min(lows) + 1)
    else:
        rep.pairs_skipped_uncertified += 1
    return rep


def casen2_check(frame: HoroballFrame, psi: EdgePath, r: int | None = None,
                 outer: int | None = None) -> tuple[LemmaReport, int, int]:
    """Replacement avoids B_{r-2delta-5}(*); returns (report, k, observed F)."""
    r = frame.largest_r(psi) if r is None else r
    gamma, f = casen2_replace(frame, psi, r, outer)
    rep = avoidance_report("casen2", frame, gamma, r - (2 * frame.delta + 5))
    return rep, r - frame.d_star_z, f


def proj_check(frame: HoroballFrame, psi: EdgePath, rep: LemmaReport | None = None) -> LemmaReport:
    rep = rep or LemmaReport("proj", frame.X.describe(), frame.delta)
    gamma = project_to_level(frame.X, psi, frame.dbar)
    wit = projection_witnesses(frame.X, psi, gamma)
    missing = [p for p, w in zip(gamma, wit) if w is None]
    if missing:
        rep.add_violation(p=missing[0], path_length=psi.length)
    else:
        rep.pairs_checked += 1
    rep.observe_max("projection_length", gamma.length)
    return rep


# ------------------------------------------------------------ random excursions

class ExcursionSampler:
    """Seeded random walks in one horoball below level dbar that return to it.

    The walk starts at x on level dbar, steps up, then moves up, down or
    horizontally (uniform over level neighbours) until it is back on level
    dbar.  Walks that come back at x, grow past ``max_length`` or leave the
    window are rejected.
    """

    def __init__(self, frame: HoroballFrame, seed: int = 0, max_length: int = 8,
                 max_depth: int | None = None, start_radii: Sequence[int] = (2, 16),
                 p_up: float = 0.3, p_down: float = 0.4):
        self.frame = frame
        X = frame.X
        self.max_length = max_length
        self.max_depth = min(max_depth or X.D - 1, X.D - 1)
        self.rng = np.random.default_rng(seed)
        self.p_up, self.p_down = p_up, p_down
        blk = frame.blk
        dz = blk.geom.pdist(frame.z_index, np.arange(blk.n))
        unit = 1 << frame.dbar
        self.starts = [np.nonzero(dz <= rad * unit)[0] for rad in start_radii]
        self._offsets: dict[int, np.ndarray] = {}
        self.attempts = 0

    def _offsets_at(self, k: int) -> np.ndarray:
        if k not in self._offsets:
            geom = self.frame.blk.geom
            rank = geom.coords.shape[1]
            reach = 1 << k
            axes = np.meshgrid(*([np.arange(-reach, reach + 1)] * rank), indexing="ij")
            pts = np.stack([a.ravel() for a in axes], axis=1)
            norm = np.abs(pts).sum(axis=1)
            self._offsets[k] = pts[(norm >= 1) & (norm <= reach)]
        return self._offsets[k]

    def _horizontal(self, a: int, k: int) -> int | None:
        blk = self.frame.blk
        geom = blk.geom
        if geom.abelian and geom.dmat is None:
            offs = self._offsets_at(k)
            c = geom.coords[a] + offs[self.rng.integers(len(offs))]
            if np.abs(c).sum() > geom.rho:
                return None
            return int(geom.grid_index[tuple(c + geom.rho)])
        d = geom.pdist(a, np.arange(blk.n))
        cand = np.nonzero((d > 0) & (d <= (1 << k)))[0]
        return int(cand[self.rng.integers(len(cand))]) if len(cand) else None

    def sample(self) -> EdgePath | None:
        """One attempt; ``None`` when rejected."""
        self.attempts += 1
        f = self.frame
        blk, dbar = f.blk, f.dbar
        pool = self.starts[int(self.rng.integers(len(self.starts)))]
        a0 = int(pool[self.rng.integers(len(pool))])
        steps = [(a0, dbar), (a0, dbar + 1)]
        while len(steps) - 1 < self.max_length:
            a, k = steps[-1]
            u = self.rng.random()
            if u < self.p_down:
                nxt = (a, k - 1)
            elif u < self.p_down + self.p_up and k < self.max_depth:
                nxt = (a, k + 1)
            else:
                b = self._horizontal(a, k)
                if b is None:
                    return None
                nxt = (b, k)
            steps.append(nxt)
            if nxt[1] == dbar:
                if nxt[0] == a0:
                    return None
                return EdgePath(blk.vertex(a, k) for a, k in steps)
        return None

    def draw(self, count: int, max_attempts: int | None = None) -> list[EdgePath]:
        out = []
        cap = max_attempts or 50 * count
        while len(out) < count and self.attempts < cap:
            p = self.sample()
            if p is not None:
                out.append(p)
        return out


@dataclass
class SweepResult:
    reports: dict
    f_by_k: dict = field(default_factory=dict)
    routed: dict = field(default_factory=dict)
    excursions: int = 0


def excursion_sweep(frame: HoroballFrame, target: int = 1000, seed: int = 0,
                    max_length: int = 8, max_depth: int | None = None,
                    start_radii: Sequence[int] = (2, 16), max_attempts: int | None = None,
                    vary_r: bool = True) -> SweepResult:
    """Sample excursions until each lemma has ``target`` certified instances.

    Each excursion gets an r drawn between d(*, z) - 2 and the largest r it
    provably avoids, so negative and small k occur too.
    """
    X = frame.X
    sampler = ExcursionSampler(frame, seed, max_length, max_depth, start_radii)
    rng = np.random.default_rng(seed + 1)
    inst = X.describe()
    reps = {name: LemmaReport(name, inst, frame.delta) for name in ("proj", "casen1", "casen2", "case1")}
    routed = {"casen1": 0, "casen2": 0, "skip": 0, "case1_only": 0}
    f_by_k: dict[int, int] = {}
    # odd k uses the ceiling rule, so both parities are tallied apart
    parity = {p: {"checked": 0, "violations": 0} for p in ("negative", "even", "odd")}
    cap = max_attempts or 200 * target
    n = 0

    def done() -> bool:
        return all(reps[k].pairs_checked + reps[k].violation_count >= target for k in reps)

    while not done() and sampler.attempts < cap:
        psi = sampler.sample()
        if psi is None:
            continue
        n += 1
        rmax = frame.largest_r(psi)
        lo = frame.d_star_z - 2
        r = int(rng.integers(lo, rmax + 1)) if vary_r and rmax > lo else rmax
        proj_check(frame, psi, reps["proj"])
        way = route(frame, psi)
        routed[way] += 1
        if way == "casen1":
            _merge_into(reps, "casen1", casen1_check(frame, psi, r))
        elif way == "casen2":
            try:
                rep, k, f = casen2_check(frame, psi, r)
            except InconclusiveError:
                reps["casen2"].pairs_skipped_uncertified += 1
            else:
                _merge_into(reps, "casen2", rep)
                tally = parity["negative" if k < 0 else ("even" if k % 2 == 0 else "odd")]
                tally["checked"] += rep.pairs_checked
                tally["violations"] += rep.violation_count
                key = max(k, -1)
                f_by_k[key] = max(f_by_k.get(key, 0), f)
        else:
            reps["casen1"].pairs_skipped_uncertified += 1
        hyp = case1_hypothesis(frame, psi)
        if hyp:
            if way != "casen1":
                routed["case1_only"] += 1
            _merge_into(reps, "case1", case1_check(frame, psi, r))
        elif hyp is None:
            reps["case1"].pairs_skipped_uncertified += 1
    for rep in reps.values():
        rep.observe("excursions", n)
        rep.observe("attempts", sampler.attempts)
        rep.observe("dbar", frame.dbar)
    reps["casen1"].observe("routing", routed)
    reps["case1"].observe("hypothesis_beyond_length_version", routed["case1_only"])
    reps["casen2"].observe("max_F_by_k", {str(k): v for k, v in sorted(f_by_k.items())})
    reps["casen2"].observe("by_k_parity", parity)
    return SweepResult(reps, f_by_k, routed, n)


def _merge_into(reps: dict, name: str, rep: LemmaReport) -> None:
    reps[name] = reps[name].merge(rep)


# ------------------------------------------------------------ F table

def casen2_f_table(X: CuspedGraph, cosets: Sequence[PeripheralCoset], dbar: int, L: int,
                   delta: int, star: DistanceField | None = None, outer_cap: int | None = 6,
                   slack: int = 4) -> dict:
    """Longest annulus route per k, tabulated over translated horoballs.

    For each horoball the closest level vertex z' fixes r = d(*, z') + k.
    Endpoints range over B^_outer(z') minus B^_inner(z') and routes avoid
    B^_{inner // 2}(z') inside B^_{outer + slack}(z').  Every allowed vertex
    is also checked to lie outside B_{r - 2delta - 5}(*).
    """
    star = star if star is not None else X.certified_bfs(STAR)
    sb = FieldBounds(X, star)
    outer = 1 << (L + 1)
    if outer_cap is not None:
        outer = min(outer, outer_cap)
    table: dict[int, dict[int, int]] = {}
    avoid = LemmaReport("casen2_table", X.describe(), delta)
    unit = 1 << dbar
    for coset in cosets:
        blk = X.block(coset)
        z, dz_star = closest_level_vertex(X, coset, dbar, star)
        c = blk.index_of(z.element)
        dz = blk.geom.pdist(c, np.arange(blk.n))
        members = np.nonzero(dz <= (outer + slack) * unit)[0]
        if blk.lens[c] + (outer + slack) * unit > X.R:
            raise InconclusiveError(f"search ball about {z!r} is clipped by the window")
        lb_all, _ = sb.level(coset, dbar)
        dzm = dz[members]
        for k in range(-1, L + 2):
            r = dz_star + k
            if k < 0:
                hole, ends = -1, dzm <= outer * unit
            else:
                inner = casen2_inner(k)
                hole = (inner // 2) * unit
                ends = (dzm > inner * unit) & (dzm <= outer * unit)
            allowed = dzm > hole
            sub = members[allowed]
            dist = _pairwise_level(blk.geom, sub, unit)
            e = ends[allowed]
            block = dist[np.ix_(e, e)]
            if np.isinf(block).any():
                raise AnnulusDisconnectedError(f"annulus at k={k} about {z!r} is disconnected")
            table.setdefault(k, {})[r] = int(block.max()) if block.size else 0
            radius = r - (2 * delta + 5)
            lows = lb_all[sub]
            if (lows > radius).all():
                avoid.pairs_checked += 1
            else:
                vals = star.level_array(blk, dbar)[sub]
                cert = (vals >= 0) & (vals <= radius)
                if cert.any():
                    avoid.add_violation(k=k, r=r, radius=radius)
                else:
                    avoid.pairs_skipped_uncertified += 1
    spread = {k: max(v.values()) - min(v.values()) for k, v in table.items()}
    avoid.observe("spread_by_k", spread)
    return {"outer": outer, "table": table, "spread": spread, "avoidance": avoid}


def _pairwise_level(geom, members: np.ndarray, unit: int) -> np.ndarray:
    if len(members) == 0:
        return np.zeros((0, 0))
    if geom.abelian and geom.dmat is None:
        c = geom.coords[members]
        d = np.abs(c[:, None, :] - c[None, :, :]).sum(axis=2)
    else:
        d = np.stack([geom.pdist(int(a), members) for a in members])
    adj = csr_matrix(((d > 0) & (d <= unit)).astype(np.int8))
    return shortest_path(adj, unweighted=True, directed=False)


# ------------------------------------------------------------ compression

@dataclass
class CompressionResult:
    path: EdgePath
    replaced: list
    radius: int


def split_excursions(psi: EdgePath, dbar: int) -> list[tuple[int, int]]:
    """Index spans (i, j) of maximal runs deeper than dbar, widened by one
    vertex on each side so both ends sit on level dbar."""
    spans = []
    i = 0
    vs = psi.vertices
    while i < len(vs):
        if depth_of(vs[i]) > dbar:
            j = i
            while j + 1 < len(vs) and depth_of(vs[j + 1]) > dbar:
                j += 1
            if i == 0 or j == len(vs) - 1:
                raise ValueError("path endpoints must have depth at most dbar")
            spans.append((i - 1, j + 1))
            i = j + 1
        else:
            i += 1
    return spans


def compress_to_depth(X: CuspedGraph, psi: EdgePath, dbar: int, r: int, delta: int,
                      star: DistanceField | None = None, frames: dict | None = None,
                      outer: int | None = None) -> CompressionResult:
    """Replace every excursion deeper than dbar by a level-dbar path.

    Far excursions are projected, close ones rerouted around z.  The output
    shares ψ's endpoints, stays at depth at most dbar and is checked to avoid
    B_{r-2delta-5}(*).
    """
    star = star if star is not None else X.certified_bfs(STAR)
    frames = {} if frames is None else frames
    spans = split_excursions(psi, dbar)
    out = list(psi.vertices[:spans[0][0]]) if spans else list(psi.vertices)
    replaced = []
    sb = None
    for n, (i, j) in enumerate(spans):
        piece = EdgePath(psi.vertices[i:j + 1])
        coset = piece[1].coset
        if coset not in frames:
            frames[coset] = HoroballFrame(X, coset, dbar, delta, star, sb)
        frame = frames[coset]
        sb = frame.sb
        if piece.start == piece.end:
            new = EdgePath([piece.start])
        else:
            way = route(frame, piece)
            if way == "casen1":
                new = project_to_level(X, piece, dbar)
            elif way == "casen2":
                new, _ = casen2_replace(frame, piece, r, outer)
            else:
                raise InconclusiveError(f"excursion {n} at {i}..{j} could not be routed")
        replaced.append(((i, j), way if piece.start != piece.end else "trivial", new.length))
        out.extend(new.vertices[1:] if out and out[-1] == new.start else new.vertices)
        nxt = spans[n + 1][0] if n + 1 < len(spans) else len(psi.vertices)
        out.extend(psi.vertices[j + 1:nxt])
    result = EdgePath(out)
    radius = r - (2 * delta + 5)
    if sb is None:
        sb = FieldBounds(X, star)
    for p in result:
        if sb.lb(p) <= radius:
            if sb.ub(p) <= radius:
                raise CounterexampleError(f"compressed path enters B_{radius}(*) at {p!r}")
            raise InconclusiveError(f"avoidance of B_{radius}(*) not certified at {p!r}")
    return CompressionResult(result, replaced, radius)


# ------------------------------------------------------------ far-out pairs

def star_M(delta: int) -> int:
    """M(delta) = 6(C + 45 delta) + 2 delta + 3 with C = 3 delta."""
    c = 3 * delta
    return 6 * (c + 45 * delta) + 2 * delta + 3


def star_K(delta: int) -> int:
    return 2 * star_M(delta)


@dataclass
class StarWitness:
    x: object
    y: object
    epsilon: int
    M: int
    holds: bool
    d_star_x: int
    d_star_y: int
    d_xy_upper: int


def check_star(X: CuspedGraph, x, y, epsilon: int, delta: int,
               star: DistanceField | None = None) -> StarWitness:
    star = star if star is not None else X.certified_bfs(STAR)
    dx, dy = star.exact(x), star.exact(y)
    if dx is None or dy is None:
        raise InconclusiveError("distance from the identity not certified")
    M = star_M(delta)
    close = abs(dx - dy) <= epsilon
    if dx + dy <= M:
        # the route through * already bounds d(x, y)
        return StarWitness(x, y, epsilon, M, close, dx, dy, dx + dy)
    f = X.certified_bfs(x, horizon=M + 1, stop_at_bound=True)
    ub = f.upper_bound(y)
    if ub is not INF and ub <= M:
        return StarWitness(x, y, epsilon, M, close, dx, dy, int(ub))
    lb = f.lower_bound(y)
    if lb is INF or lb > M:
        return StarWitness(x, y, epsilon, M, False, dx, dy, -1)
    raise InconclusiveError("d(x, y) against M not decided in the window")


@dataclass
class DdaggerWitness:
    x: object
    y: object
    variant: str
    m: int
    radius: int
    depth_cap: int | None
    N: int | None
    path: EdgePath | None
    certified: bool

    def to_dict(self, X: CuspedGraph) -> dict:
        return {"x": X.tag(self.x), "y": X.tag(self.y), "variant": self.variant, "m": self.m,
                "radius": self.radius, "depth_cap": self.depth_cap, "N": self.N,
                "certified": self.certified,
                "path": None if self.path is None else [X.tag(v) for v in self.path]}


def ddagger_radius(m: int, delta: int, variant: str) -> int:
    if variant == PLAIN:
        return m - 48 * delta
    if variant == HAT:
        return m - 50 * delta - 5
    raise ValueError(f"unknown variant {variant!r}")


def search_ddagger(X: CuspedGraph, x, y, delta: int, n_max: int, variant: str = PLAIN,
                   star: DistanceField | None = None, forbidden_radius: int | None = None,
                   depth_cap: int | None = None, stop_at_bound: bool = False) -> DdaggerWitness:
    """Shortest path of length at most n_max from x to y outside a ball about *.

    The radius defaults to m - 48 delta (plain) or m - 50 delta - 5 (hat,
    which also confines depth to K(delta)); both can be overridden so the
    search is exercised at window scale. ``stop_at_bound`` ends the search
    at the first boundary layer, trading reach for speed on large windows.
    """
    star = star if star is not None else X.certified_bfs(STAR)
    dx, dy = star.exact(x), star.exact(y)
    if dx is None or dy is None:
        raise InconclusiveError("distance from the identity not certified")
    m = min(dx, dy)
    radius = ddagger_radius(m, delta, variant) if forbidden_radius is None else forbidden_radius
    cap = depth_cap if depth_cap is not None else (star_K(delta) if variant == HAT else None)
    if cap is not None and cap >= X.D:
        cap = None
    region = Region(max_depth=cap, avoid=(star, radius))
    if not region.exact():
        raise InconclusiveError(f"ball of radius {radius} about * not certified")
    if not (region.allows(X, x) and region.allows(X, y)):
        return DdaggerWitness(x, y, variant, m, radius, cap, None, None, True)
    f = X.certified_bfs(x, horizon=n_max, region=region, stop_at_bound=stop_at_bound)
    val = f.value(y)
    if val is INF or val > n_max:
        certified = f.bound is INF or f.bound >= n_max
        return DdaggerWitness(x, y, variant, m, radius, cap, None, None, certified)
    path = EdgePath(f.path_to(y))
    return DdaggerWitness(x, y, variant, m, radius, cap, int(val), path, val <= f.bound)


# ------------------------------------------------------------ test paths

def bump(X: CuspedGraph, coset: PeripheralCoset, g: Word, h: Word, apex: int) -> list:
    """Base g, up the vertical line to ``apex``, across to h, down to base h."""
    out = [Base(g)] + [Horo(coset, g, k) for k in range(1, apex + 1)]
    out += level_path(X, coset, apex, g, h)[1:] if g != h else []
    out += [Horo(coset, h, k) for k in range(apex - 1, 0, -1)] + [Base(h)]
    return out


def random_bump_path(X: CuspedGraph, rng: np.random.Generator, dbar: int, pieces: int = 2,
                     min_norm: int = 4, spread: int = 6) -> EdgePath:
    """Chain of bumps through horoballs of alternating peripheral families.

    Starts at a random element of length ``min_norm`` and ends at level 0,
    so every deep stretch is one excursion above level dbar.
    """
    g = X.group
    start: Word = ()
    while g.length(start) < min_norm:
        options = [y for y in g.neighbors(start) if g.length(y) > g.length(start)]
        start = options[int(rng.integers(len(options)))]
    verts = [Base(start)]
    cur = start
    families = len(g.peripherals)
    for n in range(pieces):
        coset = g.peripheral_coset_of(cur, n % families)
        blk = X.block(coset)
        a = blk.index_of(cur)
        apex = int(rng.integers(dbar + 1, min(X.D - 1, dbar + 3) + 1))
        d = blk.geom.pdist(a, np.arange(blk.n))
        room = X.R - (1 << apex)
        cand = np.nonzero((d > 0) & (d <= spread) & (blk.lens <= room))[0]
        if len(cand) == 0 or blk.lens[a] > room:
            break
        nxt = blk.element(int(cand[rng.integers(len(cand))]))
        verts.extend(bump(X, coset, cur, nxt, apex)[1:])
        cur = nxt
    return EdgePath(verts)


def compress_check(X: CuspedGraph, psi: EdgePath, dbar: int, delta: int,
                   star: DistanceField, frames: dict, r: int | None = None,
                   rep: LemmaReport | None = None) -> LemmaReport:
    """One compression instance: same ends, depth at most dbar, adjacency,
    exact reassembly of the split, and avoidance of B_{r-2delta-5}(*)."""
    rep = rep or LemmaReport("compress", X.describe(), delta)
    sb = FieldBounds(X, star)
    r = min(sb.lb(v) for v in psi) - 1 if r is None else r
    spans = split_excursions(psi, dbar)
    pieces, pos = [], 0
    for i, j in spans:
        pieces.append(psi.vertices[pos:i + 1])
        pieces.append(psi.vertices[i + 1:j])
        pos = j
    pieces.append(psi.vertices[pos:])
    if tuple(v for part in pieces for v in part) != psi.vertices:
        rep.add_violation(reason="excursion split does not reassemble the path")
        return rep
    try:
        res = compress_to_depth(X, psi, dbar, r, delta, star, frames)
    except InconclusiveError:
        rep.pairs_skipped_uncertified += 1
        return rep
    except CounterexampleError as exc:
        rep.add_violation(reason=str(exc))
        return rep
    out = res.path
    if out.start != psi.start or out.end != psi.end:
        rep.add_violation(reason="endpoints changed")
    elif out.depth_range()[1] > dbar:
        rep.add_violation(reason="output deeper than dbar")
    elif not all(X.adjacent(u, v) for u, v in zip(out, out.vertices[1:])):
        rep.add_violation(reason="output is not an edge path")
    else:
        rep.pairs_checked += 1
        rep.observe_max("excursions_replaced", len(res.replaced))
        rep.observe_max("max_output_length", out.length)
    return rep

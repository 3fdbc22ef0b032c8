"""Brute-force re-implementations used as test oracles.

Nothing here calls the package's adjacency or search code: graphs are
materialized from the edge rules and searched with a plain deque BFS.
"""
from collections import deque
from itertools import combinations

from cuspcert.cusped import Base, Horo, STAR


def bfs(adj, source, allowed=None):
    dist = {source: 0}
    queue = deque([source])
    while queue:
        u = queue.popleft()
        for w in adj[u]:
            if w not in dist and (allowed is None or w in allowed):
                dist[w] = dist[u] + 1
                queue.append(w)
    return dist


# -------------------------------------------------------------- horoballs

def horoball_edges(level_vertices, level_edges, depth):
    """Edge set of the combinatorial horoball, straight from its three rules."""
    adj = {v: set() for v in level_vertices}
    for u, w in level_edges:
        adj[u].add(w)
        adj[w].add(u)
    dist = {v: bfs(adj, v) for v in level_vertices}
    edges = set()
    for k in range(depth + 1):
        for u, w in combinations(level_vertices, 2):
            d = dist[u].get(w)
            if d is None:
                continue
            if (k == 0 and d == 1) or (k > 0 and 0 < d <= 2 ** k):
                edges.add(frozenset({(u, k), (w, k)}))
    for v in level_vertices:
        for k in range(depth):
            edges.add(frozenset({(v, k), (v, k + 1)}))
    return edges


def adjacency_from_edges(edges):
    adj = {}
    for e in edges:
        u, w = tuple(e)
        adj.setdefault(u, set()).add(w)
        adj.setdefault(w, set()).add(u)
    return adj


# -------------------------------------------------------------- cusped windows

def _peripheral_lengths(group, i, radius):
    """Word lengths in P_i over its own generators, by BFS in P_i."""
    letters = group.peripheral_letters(i)
    dist = {(): 0}
    queue = deque([()])
    while queue:
        p = queue.popleft()
        if dist[p] == radius:
            continue
        for letter in letters:
            q = group.times_letter(p, letter)
            if q not in dist:
                dist[q] = dist[p] + 1
                queue.append(q)
    return dist


def materialize_cusped(X):
    """Adjacency dict of the whole window X (small instances only)."""
    g, R, D = X.group, X.R, X.D
    ball = {(): 0}
    queue = deque([()])
    while queue:
        x = queue.popleft()
        if ball[x] == R:
            continue
        for letter in g.letters:
            y = g.times_letter(x, letter)
            if y not in ball:
                ball[y] = ball[x] + 1
                queue.append(y)
    adj = {Base(x): set() for x in ball}
    for x in ball:
        for letter in g.letters:
            y = g.times_letter(x, letter)
            if y in ball:
                adj[Base(x)].add(Base(y))
    for i in range(len(g.peripherals)):
        plen = _peripheral_lengths(g, i, 2 * R)
        cosets = {}
        for x in ball:
            cosets.setdefault(g.peripheral_coset_of(x, i), []).append(x)
        for coset, members in cosets.items():
            for x in members:
                for k in range(1, D + 1):
                    adj.setdefault(Horo(coset, x, k), set())
            for x in members:
                adj[Base(x)].add(Horo(coset, x, 1))
                adj[Horo(coset, x, 1)].add(Base(x))
                for k in range(1, D):
                    adj[Horo(coset, x, k)].add(Horo(coset, x, k + 1))
                    adj[Horo(coset, x, k + 1)].add(Horo(coset, x, k))
            for x, y in combinations(members, 2):
                d = plen[g.multiply(g.inverse(x), y)]
                for k in range(1, D + 1):
                    if d <= 2 ** k:
                        adj[Horo(coset, x, k)].add(Horo(coset, y, k))
                        adj[Horo(coset, y, k)].add(Horo(coset, x, k))
    return adj


def depth(v):
    return 0 if isinstance(v, Base) else v.level


def ddagger_minimal_n(adj, x, y, radius, depth_cap, n_max):
    """Least length of an x-y path avoiding B_radius(*) and depths past the cap."""
    star = bfs(adj, STAR)
    allowed = {v for v in adj
               if star[v] > radius and (depth_cap is None or depth(v) <= depth_cap)}
    if x not in allowed or y not in allowed:
        return None
    d = bfs(adj, x, allowed).get(y)
    return d if d is not None and d <= n_max else None

"""Catalog of marked groups with solvable normal forms.

Words are tuples of integer letters: generator ``i`` is letter ``2*i`` and its
formal inverse is ``2*i + 1``, so ``letter ^ 1`` inverts a letter.  Letter
order is therefore ``a < a^-1 < b < b^-1 < ...``, which fixes shortlex.

Every normal form produced here is a geodesic word, so the word length of an
element is ``len(normal_form)``.
"""
from __future__ import annotations

import re
from collections import deque
from functools import lru_cache
from typing import Iterable, NamedTuple, Sequence

Word = tuple[int, ...]
GroupElement = Word  # canonical normal-form word

IDENTITY: Word = ()

FREE_ABELIAN = "free_abelian"
FREE = "free"
FREE_PRODUCT = "free_product"


class MalformedWordError(ValueError):
    pass


class BallSizeError(RuntimeError):
    """Raised instead of silently truncating an enumeration."""


class PeripheralCoset(NamedTuple):
    index: int
    representative: Word


def shortlex_key(word: Word) -> tuple[int, Word]:
    return (len(word), word)


def _default_names(count: int, start: int = 0) -> tuple[str, ...]:
    letters = "abcdefghijklmnopqrstuvwxyz"
    if start + count <= len(letters):
        return tuple(letters[start:start + count])
    return tuple(f"g{i}" for i in range(start, start + count))


class MarkedGroup:
    """A finitely generated group given by a normal-form procedure.

    Instances are immutable; caches attached to them only memoize pure
    functions of the group.
    """

    def __init__(self, kind: str, generators: Sequence[str],
                 factors: Sequence["MarkedGroup"] = (),
                 peripherals: Iterable[Iterable[str]] = ()):
        generators = tuple(generators)
        if kind not in (FREE_ABELIAN, FREE, FREE_PRODUCT):
            raise ValueError(f"unknown group kind {kind!r}")
        if len(set(generators)) != len(generators):
            raise ValueError("generator symbols must be distinct")
        for name in generators:
            if not re.fullmatch(r"[A-Za-z_][A-Za-z0-9_]*", name):
                raise ValueError(f"invalid generator symbol {name!r}")
        self.kind = kind
        self.generators = generators
        self.factors = tuple(factors)
        self._index = {name: i for i, name in enumerate(generators)}

        # free products: owner factor and offset of every global generator
        self._owner: tuple[int, ...] = ()
        self._offsets: tuple[int, ...] = ()
        if kind == FREE_PRODUCT:
            if len(self.factors) < 2:
                raise ValueError("a free product needs at least two factors")
            owner, offsets, names = [], [], []
            for j, f in enumerate(self.factors):
                offsets.append(len(names))
                owner.extend([j] * f.rank)
                names.extend(f.generators)
            if tuple(names) != generators:
                raise ValueError("free product generators must concatenate the factors' generators")
            self._owner = tuple(owner)
            self._offsets = tuple(offsets)
        elif self.factors:
            raise ValueError(f"{kind} groups take no factors")

        periph = []
        for spec in peripherals:
            names = tuple(spec)
            if not names:
                raise ValueError("empty peripheral generating set")
            unknown = [n for n in names if n not in self._index]
            if unknown:
                raise ValueError(f"peripheral generators {unknown} are not generators of the group")
            periph.append(tuple(sorted(set(names), key=self._index.__getitem__)))
        self.peripherals: tuple[tuple[str, ...], ...] = tuple(periph)
        self._periph_sets = tuple(frozenset(self._index[n] for n in p) for p in periph)
        self._ball_cache: dict[tuple[int, int], tuple[Word, ...]] = {}

    # ------------------------------------------------------------------ basics

    @property
    def rank(self) -> int:
        return len(self.generators)

    @property
    def letters(self) -> tuple[int, ...]:
        return tuple(range(2 * self.rank))

    def __repr__(self) -> str:
        if self.kind == FREE_PRODUCT:
            inner = " * ".join(repr(f) for f in self.factors)
            body = f"({inner})"
        elif self.kind == FREE_ABELIAN:
            body = f"Z^{self.rank}<{','.join(self.generators)}>"
        else:
            body = f"F<{','.join(self.generators)}>"
        if self.peripherals:
            body += " rel {" + "; ".join(",".join(p) for p in self.peripherals) + "}"
        return body

    def describe(self) -> dict:
        out: dict = {"kind": self.kind, "generators": list(self.generators)}
        if self.factors:
            out["factors"] = [f.describe() for f in self.factors]
        out["peripherals"] = [list(p) for p in self.peripherals]
        return out

    def with_peripherals(self, peripherals: Iterable[Iterable[str]]) -> "MarkedGroup":
        return MarkedGroup(self.kind, self.generators, self.factors, peripherals)

    # ----------------------------------------------------------------- parsing

    def parse(self, text: str | Iterable[int]) -> Word:
        """Parse ``"a b a^-1"`` (also ``a⁻¹`` and ``a^3``) into a raw word."""
        if not isinstance(text, str):
            word = tuple(text)
            for letter in word:
                if not (isinstance(letter, int) and 0 <= letter < 2 * self.rank):
                    raise MalformedWordError(f"bad letter {letter!r}")
            return word
        word: list[int] = []
        for token in text.replace("⁻¹", "^-1").replace(".", " ").split():
            if token in ("1", "e"):
                continue
            m = re.fullmatch(r"([A-Za-z_][A-Za-z0-9_]*)(?:\^(-?\d+))?", token)
            if not m or m.group(1) not in self._index:
                raise MalformedWordError(f"unknown generator symbol in {token!r}")
            power = int(m.group(2)) if m.group(2) is not None else 1
            letter = 2 * self._index[m.group(1)] + (1 if power < 0 else 0)
            word.extend([letter] * abs(power))
        return tuple(word)

    def element(self, text: str | Iterable[int]) -> GroupElement:
        return self.normal_form(self.parse(text))

    def format(self, word: Word, sep: str = " ") -> str:
        out = []
        for letter in word:
            name = self.generators[letter >> 1]
            out.append(name + "^-1" if letter & 1 else name)
        return sep.join(out)

    # ------------------------------------------------------------ normal forms

    def normal_form(self, word: Word | str) -> Word:
        if isinstance(word, str):
            word = self.parse(word)
        else:
            word = tuple(word)
            for letter in word:
                if not (isinstance(letter, int) and 0 <= letter < 2 * self.rank):
                    raise MalformedWordError(f"bad letter {letter!r}")
        return self._nf(word)

    def _nf(self, word: Word) -> Word:
        if self.kind == FREE_ABELIAN:
            exps = [0] * self.rank
            for letter in word:
                exps[letter >> 1] += -1 if letter & 1 else 1
            return self._from_exponents(exps)
        if self.kind == FREE:
            stack: list[int] = []
            for letter in word:
                if stack and stack[-1] == letter ^ 1:
                    stack.pop()
                else:
                    stack.append(letter)
            return tuple(stack)
        syllables: list[tuple[int, Word]] = []
        for letter in word:
            j = self._owner[letter >> 1]
            local = letter - 2 * self._offsets[j]
            if syllables and syllables[-1][0] == j:
                merged = self.factors[j]._nf(syllables[-1][1] + (local,))
                if merged:
                    syllables[-1] = (j, merged)
                else:
                    syllables.pop()
            else:
                syllables.append((j, (local,)))
        return self._join(syllables)

    def _from_exponents(self, exps: Sequence[int]) -> Word:
        out: list[int] = []
        for i, e in enumerate(exps):
            if e:
                out.extend([2 * i + (e < 0)] * abs(e))
        return tuple(out)

    def _split(self, word: Word) -> list[tuple[int, Word]]:
        """Syllable decomposition of a free-product normal form."""
        syllables: list[tuple[int, Word]] = []
        for letter in word:
            j = self._owner[letter >> 1]
            local = letter - 2 * self._offsets[j]
            if syllables and syllables[-1][0] == j:
                syllables[-1] = (j, syllables[-1][1] + (local,))
            else:
                syllables.append((j, (local,)))
        return syllables

    def _join(self, syllables: Iterable[tuple[int, Word]]) -> Word:
        out: list[int] = []
        for j, local in syllables:
            shift = 2 * self._offsets[j]
            out.extend(letter + shift for letter in local)
        return tuple(out)

    def multiply(self, x: Word, y: Word) -> Word:
        return self._nf(tuple(x) + tuple(y))

    def inverse(self, x: Word) -> Word:
        return self._nf(tuple(letter ^ 1 for letter in reversed(x)))

    def times_letter(self, x: Word, letter: int) -> Word:
        if self.kind == FREE:
            if x and x[-1] == letter ^ 1:
                return x[:-1]
            return x + (letter,)
        if self.kind == FREE_PRODUCT:
            j = self._owner[letter >> 1]
            start = len(x)
            while start > 0 and self._owner[x[start - 1] >> 1] == j:
                start -= 1
            shift = 2 * self._offsets[j]
            tail = tuple(l - shift for l in x[start:]) + (letter - shift,)
            merged = self.factors[j]._nf(tail)
            return x[:start] + tuple(l + shift for l in merged)
        return self._nf(x + (letter,))

    def length(self, x: Word) -> int:
        return len(x)

    def distance(self, x: Word, y: Word) -> int:
        return len(self._nf(tuple(l ^ 1 for l in reversed(x)) + tuple(y)))

    def neighbors(self, x: Word) -> list[Word]:
        """Cayley neighbours ``x*s`` for ``s`` in S and S^-1, in letter order."""
        seen: dict[Word, None] = {}
        for letter in range(2 * self.rank):
            y = self.times_letter(x, letter)
            if y != x:
                seen.setdefault(y)
        return list(seen)

    def ball_distances(self, center: Word = IDENTITY, radius: int = 0,
                       max_size: int | None = 2_000_000,
                       letters: Iterable[int] | None = None) -> dict[Word, int]:
        if radius < 0:
            raise ValueError("radius must be non-negative")
        letters = tuple(range(2 * self.rank)) if letters is None else tuple(letters)
        center = self._nf(tuple(center))
        dist = {center: 0}
        queue = deque([center])
        while queue:
            x = queue.popleft()
            d = dist[x]
            if d == radius:
                continue
            for letter in letters:
                y = self.times_letter(x, letter)
                if y not in dist:
                    dist[y] = d + 1
                    if max_size is not None and len(dist) > max_size:
                        raise BallSizeError(
                            f"ball of radius {radius} exceeds {max_size} elements")
                    queue.append(y)
        return dist

    def enumerate_ball(self, center: Word = IDENTITY, radius: int = 0,
                       max_size: int | None = 2_000_000) -> set[Word]:
        return set(self.ball_distances(center, radius, max_size))

    # ------------------------------------------------------------- peripherals

    def _check_peripheral(self, i: int) -> frozenset[int]:
        if not (isinstance(i, int) and 0 <= i < len(self.peripherals)):
            raise IndexError(f"no peripheral subgroup with index {i!r}")
        return self._periph_sets[i]

    def peripheral_letters(self, i: int) -> tuple[int, ...]:
        gens = sorted(self._check_peripheral(i))
        return tuple(l for g in gens for l in (2 * g, 2 * g + 1))

    def peripheral_coset_of(self, x: Word, i: int) -> PeripheralCoset:
        gens = self._check_peripheral(i)
        return PeripheralCoset(i, self._coset_rep(tuple(x), gens))

    def _coset_rep(self, x: Word, gens: frozenset[int]) -> Word:
        """Shortlex-least element of ``x<gens>`` (x in normal form)."""
        if self.kind == FREE_ABELIAN:
            return tuple(l for l in x if (l >> 1) not in gens)
        if self.kind == FREE:
            end = len(x)
            while end > 0 and (x[end - 1] >> 1) in gens:
                end -= 1
            return x[:end]
        syllables = self._split(x)
        while syllables:
            j, local = syllables[-1]
            off = self._offsets[j]
            local_gens = frozenset(g - off for g in gens
                                   if self._owner[g] == j)
            if not local_gens:
                break
            rep = self.factors[j]._coset_rep(local, local_gens)
            if rep:
                syllables[-1] = (j, rep)
                break
            syllables.pop()
        return self._join(syllables)

    def in_peripheral(self, p: Word, i: int) -> bool:
        return not self._coset_rep(tuple(p), self._check_peripheral(i))

    def peripheral_is_abelian(self, i: int) -> bool:
        return self._abelian_subset(self._check_peripheral(i))

    def _abelian_subset(self, gens: frozenset[int]) -> bool:
        if len(gens) <= 1 or self.kind == FREE_ABELIAN:
            return True
        if self.kind == FREE:
            return False
        owners = {self._owner[g] for g in gens}
        if len(owners) != 1:
            return False
        j = owners.pop()
        return self.factors[j]._abelian_subset(
            frozenset(g - self._offsets[j] for g in gens))

    def peripheral_coordinates(self, p: Word, i: int) -> tuple[int, ...]:
        """Exponent vector of ``p`` in an abelian peripheral subgroup."""
        gens = sorted(self._check_peripheral(i))
        pos = {g: k for k, g in enumerate(gens)}
        coords = [0] * len(gens)
        for letter in p:
            coords[pos[letter >> 1]] += -1 if letter & 1 else 1
        return tuple(coords)

    def peripheral_ball(self, i: int, radius: int) -> tuple[Word, ...]:
        """Elements of P_i of word length <= radius, shortlex sorted."""
        key = (i, radius)
        if key not in self._ball_cache:
            dist = self.ball_distances(IDENTITY, radius,
                                       letters=self.peripheral_letters(i))
            self._ball_cache[key] = tuple(sorted(dist, key=shortlex_key))
        return self._ball_cache[key]

    def coset_members(self, coset: PeripheralCoset, radius: int) -> tuple[Word, ...]:
        """``coset ∩ B_radius(identity)``, shortlex sorted."""
        t = coset.representative
        if len(t) > radius:
            return ()
        out = []
        for p in self.peripheral_ball(coset.index, radius + len(t)):
            y = self._nf(t + p)
            if len(y) <= radius:
                out.append(y)
        out.sort(key=shortlex_key)
        return tuple(out)

    def axis_letter(self) -> int:
        """Letter whose powers give the catalog geodesic line through identity."""
        if self.rank == 0:
            raise ValueError("trivial group has no axis")
        return 0


# ------------------------------------------------------------------ factories

def free_abelian(rank: int, names: Sequence[str] | None = None,
                 peripherals: Iterable[Iterable[str]] = ()) -> MarkedGroup:
    names = _default_names(rank) if names is None else tuple(names)
    if len(names) != rank:
        raise ValueError("need one name per generator")
    return MarkedGroup(FREE_ABELIAN, names, (), peripherals)


def free_group(rank: int, names: Sequence[str] | None = None,
               peripherals: Iterable[Iterable[str]] = ()) -> MarkedGroup:
    names = _default_names(rank) if names is None else tuple(names)
    if len(names) != rank:
        raise ValueError("need one name per generator")
    return MarkedGroup(FREE, names, (), peripherals)


def free_product(factors: Sequence[MarkedGroup],
                 peripherals: Iterable[Iterable[str]] = ()) -> MarkedGroup:
    names: list[str] = []
    for f in factors:
        names.extend(f.generators)
    return MarkedGroup(FREE_PRODUCT, names, factors, peripherals)


def normal_form(g: MarkedGroup, w: Word | str) -> Word:
    return g.normal_form(w)


def neighbors(g: MarkedGroup, x: Word) -> list[Word]:
    return g.neighbors(x)


def enumerate_ball(g: MarkedGroup, center: Word, radius: int,
                   max_size: int | None = 2_000_000) -> set[Word]:
    return g.enumerate_ball(center, radius, max_size)


def peripheral_coset_of(g: MarkedGroup, x: Word, i: int) -> PeripheralCoset:
    return g.peripheral_coset_of(x, i)


@lru_cache(maxsize=None)
def _parse_spec_cached(text: str) -> MarkedGroup:
    return parse_group_spec(text)


def parse_group_spec(text: str, peripherals: Iterable[Iterable[str]] | None = None) -> MarkedGroup:
    """Parse a group expression.

    Grammar::

        group   := atom ("*" atom)*
        atom    := "Z^" n | "Z" | "F" n | "F_" n | "(" group ")"
                 | "free_abelian(" n ")" | "free(" n ")"

    Generators are named a, b, c, ... left to right across factors.  An
    optional ``" rel a,b; c,d"`` suffix lists peripheral generator subsets.
    """
    text = text.strip()
    if " rel " in text and peripherals is None:
        text, rel = text.split(" rel ", 1)
        peripherals = [tuple(s.strip() for s in part.split(",") if s.strip())
                       for part in rel.split(";") if part.strip()]
    pos = 0
    counter = [0]

    def skip() -> None:
        nonlocal pos
        while pos < len(text) and text[pos].isspace():
            pos += 1

    def number() -> int:
        nonlocal pos
        skip()
        m = re.match(r"\d+", text[pos:])
        if not m:
            raise ValueError(f"expected a number at {text[pos:]!r}")
        pos += m.end()
        return int(m.group())

    def expect(s: str) -> None:
        nonlocal pos
        skip()
        if not text.startswith(s, pos):
            raise ValueError(f"expected {s!r} at {text[pos:]!r}")
        pos += len(s)

    def atom() -> MarkedGroup:
        nonlocal pos
        skip()
        rest = text[pos:]
        if rest.startswith("("):
            pos += 1
            g = group()
            expect(")")
            return g
        for prefix, kind in (("free_abelian(", FREE_ABELIAN), ("free(", FREE)):
            if rest.startswith(prefix):
                pos += len(prefix)
                n = number()
                expect(")")
                return _make(kind, n)
        if rest.startswith("Z^"):
            pos += 2
            return _make(FREE_ABELIAN, number())
        if rest.startswith("F_") or (rest.startswith("F") and rest[1:2].isdigit()):
            pos += 2 if rest.startswith("F_") else 1
            return _make(FREE, number())
        if rest.startswith("Z"):
            pos += 1
            return _make(FREE_ABELIAN, 1)
        raise ValueError(f"cannot parse group expression at {rest!r}")

    def _make(kind: str, n: int) -> MarkedGroup:
        names = _default_names(n, counter[0])
        counter[0] += n
        return MarkedGroup(kind, names)

    def group() -> MarkedGroup:
        nonlocal pos
        parts = [atom()]
        skip()
        while pos < len(text) and text[pos] == "*":
            pos += 1
            parts.append(atom())
            skip()
        if len(parts) == 1:
            return parts[0]
        return free_product(parts)

    g = group()
    skip()
    if pos != len(text):
        raise ValueError(f"trailing input {text[pos:]!r}")
    if peripherals:
        g = g.with_peripherals(peripherals)
    return g

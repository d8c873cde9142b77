"""Ordered monomial groups underlying the series arithmetic.

Two monomial kinds share one informal protocol (``one``, ``mul``,
``inv``, ``ppow``, ``cmp``, ``levels``, ``level_split``, total order
operators):

* :class:`Monomial` -- an element of a declared level-graded group with
  finitely many named generators and rational exponents.  Comparison is
  anti-lexicographic by level: the highest-level generator carrying a
  nonzero exponent decides, and within one level the generator declared
  later dominates.  Every generator is infinitely large (``g > 1``), so
  a positive exponent on the deciding generator means "greater".
* :class:`TransMonomial` -- a transmonomial ``x^r * exp(a)`` where the
  exponent ``a`` is a finite, canonically sorted purely infinite sum of
  lower-height transmonomials.  ``exp`` is an order isomorphism, so
  ``x^r exp(a) > x^s exp(b)`` iff ``a - b`` has a positive leading
  coefficient, falling back to ``r > s`` when ``a = b``.

A :class:`GridWitness` bounds a series support inside ``base * R*`` for
a finite set ``R`` of strictly infinitesimal ratios; such grids are
reverse well-ordered and have finite factorization fibers, which is what
makes the downstream convolution and operator sums effective.
"""

from __future__ import annotations

import heapq
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, Iterator, Sequence

from .errors import BudgetExhausted, DomainError

Q = Fraction

LT, EQ, GT = -1, 0, 1


def _sign(q: Fraction) -> int:
    return (q > 0) - (q < 0)


@dataclass(frozen=True)
class GeneratorId:
    """A named generator living at a fixed level of the grading."""

    name: str
    level: int


class Group:
    """Declaration of a level-graded ordered abelian group.

    Generators are given in declaration order; within one level the
    later-declared generator is the larger one.  The declaration fixes
    the total order, so monomials from different declarations never
    compare (``DomainError``).
    """

    def __init__(self, generators: Iterable[GeneratorId | tuple[str, int]]):
        gens: list[GeneratorId] = []
        for g in generators:
            if not isinstance(g, GeneratorId):
                g = GeneratorId(g[0], int(g[1]))
            gens.append(g)
        if len({(g.name, g.level) for g in gens}) != len(gens):
            raise DomainError("duplicate generator declaration")
        self.generators = tuple(gens)
        # rank = position among same-level generators, in declaration order
        self._key_of: dict[GeneratorId, tuple[int, int]] = {}
        self._gen_of: dict[tuple[int, int], GeneratorId] = {}
        counts: dict[int, int] = {}
        for g in gens:
            rank = counts.get(g.level, 0)
            counts[g.level] = rank + 1
            self._key_of[g] = (g.level, rank)
            self._gen_of[(g.level, rank)] = g
        self.one = Monomial(self, ())

    def gen(self, name: str) -> Monomial:
        for g in self.generators:
            if g.name == name:
                return self.monomial({g: Q(1)})
        raise DomainError(f"unknown generator {name!r}")

    def monomial(self, exponents: dict[GeneratorId, Fraction]) -> Monomial:
        exps = []
        for g, e in exponents.items():
            if g not in self._key_of:
                raise DomainError(f"generator {g} not declared in this group")
            e = Q(e)
            if e != 0:
                lvl, rank = self._key_of[g]
                exps.append((lvl, rank, e))
        exps.sort(reverse=True)
        return Monomial(self, tuple(exps))

    def __repr__(self) -> str:
        return f"Group({[g.name for g in self.generators]})"


class Monomial:
    """Element of a declared :class:`Group`; exponents are exact rationals.

    Internally a tuple of ``(level, rank, exponent)`` triples sorted by
    decreasing significance, so comparison is a single merge walk.
    """

    __slots__ = ("group", "exps", "_hash")

    def __init__(self, group: Group, exps: tuple[tuple[int, int, Fraction], ...]):
        self.group = group
        self.exps = exps
        self._hash = hash((id(group), exps))

    # -- group structure ------------------------------------------------

    def one(self) -> Monomial:
        return self.group.one

    def is_one(self) -> bool:
        return not self.exps

    def mul(self, other: Monomial) -> Monomial:
        if other.group is not self.group:
            raise DomainError("monomials from different group declarations")
        out: list[tuple[int, int, Fraction]] = []
        a, b = self.exps, other.exps
        i = j = 0
        while i < len(a) and j < len(b):
            ka, kb = a[i][:2], b[j][:2]
            if ka > kb:
                out.append(a[i])
                i += 1
            elif kb > ka:
                out.append(b[j])
                j += 1
            else:
                e = a[i][2] + b[j][2]
                if e != 0:
                    out.append((ka[0], ka[1], e))
                i += 1
                j += 1
        out.extend(a[i:])
        out.extend(b[j:])
        return Monomial(self.group, tuple(out))

    def inv(self) -> Monomial:
        return Monomial(self.group, tuple((l, r, -e) for l, r, e in self.exps))

    def ppow(self, q: Fraction | int) -> Monomial:
        q = Q(q)
        if q == 0:
            return self.group.one
        return Monomial(self.group, tuple((l, r, e * q) for l, r, e in self.exps))

    def div(self, other: Monomial) -> Monomial:
        return self.mul(other.inv())

    # -- order ----------------------------------------------------------

    def cmp(self, other: Monomial) -> int:
        if other.group is not self.group:
            raise DomainError("monomials from different group declarations")
        a, b = self.exps, other.exps
        i = j = 0
        while i < len(a) or j < len(b):
            if j >= len(b) or (i < len(a) and a[i][:2] > b[j][:2]):
                return _sign(a[i][2])
            if i >= len(a) or b[j][:2] > a[i][:2]:
                return -_sign(b[j][2])
            if a[i][2] != b[j][2]:
                return _sign(a[i][2] - b[j][2])
            i += 1
            j += 1
        return EQ

    def __lt__(self, other: Monomial) -> bool:
        return self.cmp(other) < 0

    def __le__(self, other: Monomial) -> bool:
        return self.cmp(other) <= 0

    def __gt__(self, other: Monomial) -> bool:
        return self.cmp(other) > 0

    def __ge__(self, other: Monomial) -> bool:
        return self.cmp(other) >= 0

    def __eq__(self, other) -> bool:
        return (
            isinstance(other, Monomial)
            and other.group is self.group
            and other.exps == self.exps
        )

    def __hash__(self) -> int:
        return self._hash

    def is_infinitesimal(self) -> bool:
        return bool(self.exps) and _sign(self.exps[0][2]) < 0

    # -- grading ---------------------------------------------------------

    def max_level(self) -> int:
        return self.exps[0][0] if self.exps else 0

    def levels(self) -> list[tuple[int, Monomial]]:
        """Canonical factorization across the level subgroups, ascending."""
        buckets: dict[int, list[tuple[int, int, Fraction]]] = {}
        for l, r, e in self.exps:
            buckets.setdefault(l, []).append((l, r, e))
        return [
            (l, Monomial(self.group, tuple(sorted(buckets[l], reverse=True))))
            for l in sorted(buckets)
        ]

    def level_split(self, n: int) -> tuple[Monomial, Monomial]:
        """Split into (levels >= n, levels < n) components."""
        hi = tuple(t for t in self.exps if t[0] >= n)
        lo = tuple(t for t in self.exps if t[0] < n)
        return Monomial(self.group, hi), Monomial(self.group, lo)

    # -- text ------------------------------------------------------------

    def __str__(self) -> str:
        if not self.exps:
            return "1"
        parts = []
        for l, r, e in self.exps:
            name = self.group._gen_of[(l, r)].name
            parts.append(_power_text(name, e))
        return "*".join(parts)

    def __repr__(self) -> str:
        return f"<{self}>"


def _power_text(base: str, e: Fraction) -> str:
    if e == 1:
        return base
    if e.denominator == 1:
        return f"{base}^{e.numerator}"
    return f"{base}^({e})"


def compare(a, b) -> int:
    """Total-order comparison; returns -1, 0, or 1."""
    return a.cmp(b)


def mul(a, b):
    return a.mul(b)


# ---------------------------------------------------------------------------
# Transmonomials
# ---------------------------------------------------------------------------

_TT = tuple  # iterm entries are (Fraction coeff, TransMonomial) pairs


class TransMonomial:
    """``x^r * exp(a)`` with ``a`` a finite purely infinite combination
    of strictly lower-height transmonomials, kept canonically sorted so
    equality is syntactic.

    ``exp`` here is the multiplicative copy of the additive group of
    purely infinite elements: products add the ``x`` exponents and merge
    the exponent combinations, and the order is the unique one making
    that copy order-preserving.
    """

    __slots__ = ("r", "iterms", "_hash", "_height")

    def __init__(self, r: Fraction, iterms: tuple = ()):
        self.r = Q(r)
        self.iterms = iterms
        self._hash = hash((self.r, iterms))
        self._height = 0 if not iterms else 1 + max(m._height for _, m in iterms)

    # -- group structure ------------------------------------------------

    def one(self) -> TransMonomial:
        return TM_ONE

    def is_one(self) -> bool:
        return self.r == 0 and not self.iterms

    def mul(self, other: TransMonomial) -> TransMonomial:
        if not isinstance(other, TransMonomial):
            raise DomainError("mixed monomial kinds")
        return TransMonomial(self.r + other.r, _merge_iterms(self.iterms, other.iterms))

    def inv(self) -> TransMonomial:
        return TransMonomial(-self.r, tuple((-c, m) for c, m in self.iterms))

    def ppow(self, q: Fraction | int) -> TransMonomial:
        q = Q(q)
        if q == 0:
            return TM_ONE
        return TransMonomial(self.r * q, tuple((c * q, m) for c, m in self.iterms))

    def div(self, other: TransMonomial) -> TransMonomial:
        return self.mul(other.inv())

    # -- order ----------------------------------------------------------

    def cmp(self, other: TransMonomial) -> int:
        d = self.div(other)
        if d.iterms:
            return _sign(d.iterms[0][0])
        return _sign(d.r)

    def __lt__(self, other) -> bool:
        return self.cmp(other) < 0

    def __le__(self, other) -> bool:
        return self.cmp(other) <= 0

    def __gt__(self, other) -> bool:
        return self.cmp(other) > 0

    def __ge__(self, other) -> bool:
        return self.cmp(other) >= 0

    def __eq__(self, other) -> bool:
        return (
            isinstance(other, TransMonomial)
            and other.r == self.r
            and other.iterms == self.iterms
        )

    def __hash__(self) -> int:
        return self._hash

    def is_infinitesimal(self) -> bool:
        return self.cmp(TM_ONE) < 0

    # -- grading ---------------------------------------------------------

    @property
    def height(self) -> int:
        """Exponential height: 0 for ``x^r``, else 1 + height of ``a``."""
        return self._height

    def exp_part(self) -> TransMonomial:
        return TransMonomial(Q(0), self.iterms)

    def max_level(self) -> int:
        return self._height

    def levels(self) -> list[tuple[int, TransMonomial]]:
        out: list[tuple[int, TransMonomial]] = []
        if self.r != 0:
            out.append((0, TransMonomial(self.r)))
        buckets: dict[int, list] = {}
        for c, m in self.iterms:
            buckets.setdefault(m._height + 1, []).append((c, m))
        for lvl in sorted(buckets):
            out.append((lvl, TransMonomial(Q(0), tuple(buckets[lvl]))))
        return out

    def level_split(self, n: int) -> tuple[TransMonomial, TransMonomial]:
        if n <= 0:
            return self, TM_ONE
        hi = tuple((c, m) for c, m in self.iterms if m._height + 1 >= n)
        lo = tuple((c, m) for c, m in self.iterms if m._height + 1 < n)
        return TransMonomial(Q(0), hi), TransMonomial(self.r, lo)

    # -- text ------------------------------------------------------------

    def text(self, var: str = "x") -> str:
        parts = []
        if self.r != 0:
            parts.append(_power_text(var, self.r))
        if self.iterms:
            body = format_terms(self.iterms, var=var)
            parts.append(f"exp({body})")
        return "*".join(parts) if parts else "1"

    def __str__(self) -> str:
        return self.text()

    def __repr__(self) -> str:
        return f"<{self}>"


def _merge_iterms(a: tuple, b: tuple) -> tuple:
    out = []
    i = j = 0
    while i < len(a) and j < len(b):
        c = a[i][1].cmp(b[j][1])
        if c > 0:
            out.append(a[i])
            i += 1
        elif c < 0:
            out.append(b[j])
            j += 1
        else:
            s = a[i][0] + b[j][0]
            if s != 0:
                out.append((s, a[i][1]))
            i += 1
            j += 1
    out.extend(a[i:])
    out.extend(b[j:])
    return tuple(out)


TM_ONE = TransMonomial(Q(0))


def x_mono(r: Fraction | int = 1) -> TransMonomial:
    return TransMonomial(Q(r))


def format_terms(terms: Sequence[tuple[Fraction, object]], var: str = "x") -> str:
    """Canonical text of a finite term list ``(coeff, monomial)`` in
    decreasing monomial order: ``c*mono +- ...`` with ``1*m`` shortened
    to ``m`` and coefficients printed as ``p/q``."""
    if not terms:
        return "0"
    chunks: list[str] = []
    for k, (c, m) in enumerate(terms):
        neg = c < 0
        mag = -c if neg else c
        mono_txt = m.text(var) if isinstance(m, TransMonomial) else str(m)
        if mono_txt == "1":
            body = str(mag)
        elif mag == 1:
            body = mono_txt
        else:
            body = f"{mag}*{mono_txt}"
        if k == 0:
            chunks.append(f"-{body}" if neg else body)
        else:
            chunks.append(f"- {body}" if neg else f"+ {body}")
    return " ".join(chunks)


# ---------------------------------------------------------------------------
# Grid witnesses
# ---------------------------------------------------------------------------


class GridWitness:
    """Support bound ``base * ratios*`` with every ratio strictly
    infinitesimal.  The generated set is reverse well-ordered and every
    element admits only finitely many ordered factorizations over the
    ratios (Neumann), so it is safe to index series supports by it.
    """

    __slots__ = ("base", "ratios")

    def __init__(self, base, ratios: Iterable = ()):
        rs = set()
        one = base.one()
        for r in ratios:
            c = r.cmp(one)
            if c == 0:
                continue
            if c > 0:
                raise DomainError(f"grid ratio {r} is not infinitesimal")
            rs.add(r)
        self.base = base
        self.ratios = frozenset(rs)

    def product(self, other: GridWitness) -> GridWitness:
        return GridWitness(self.base.mul(other.base), self.ratios | other.ratios)

    def union(self, other: GridWitness) -> GridWitness:
        hi, lo = self.base, other.base
        if hi.cmp(lo) < 0:
            hi, lo = lo, hi
        q = lo.div(hi)
        extra = [] if q.is_one() else [q]
        return GridWitness(hi, self.ratios | other.ratios | set(extra))

    def scaled(self, m) -> GridWitness:
        return GridWitness(self.base.mul(m), self.ratios)

    def star(self) -> GridWitness:
        """Witness for the generated monoid; requires ``base < 1``."""
        one = self.base.one()
        if self.base.cmp(one) >= 0:
            raise DomainError("star of a grid needs an infinitesimal base")
        return GridWitness(one, self.ratios | {self.base})

    def all_infinitesimal(self) -> bool:
        return self.base.cmp(self.base.one()) < 0

    def iter_grid(self) -> Iterator:
        """Grid monomials in strictly decreasing order (lazy, possibly
        infinite).  Uses a frontier heap with deduplication."""
        seen = {self.base}
        heap = [_Rev(self.base)]
        ratios = sorted(self.ratios, reverse=True)
        while heap:
            m = heapq.heappop(heap).m
            yield m
            for r in ratios:
                c = m.mul(r)
                if c not in seen:
                    seen.add(c)
                    heapq.heappush(heap, _Rev(c))

    def prefix(self, n: int) -> list:
        out = []
        for m in self.iter_grid():
            out.append(m)
            if len(out) >= n:
                break
        return out

    def __repr__(self) -> str:
        rs = ", ".join(sorted(str(r) for r in self.ratios))
        return f"GridWitness(base={self.base}, ratios={{{rs}}})"


class _Rev:
    """Max-heap adapter for heapq over the monomial order."""

    __slots__ = ("m",)

    def __init__(self, m):
        self.m = m

    def __lt__(self, other: "_Rev") -> bool:
        return other.m < self.m


def count_factorizations(m, g: GridWitness, max_len: int) -> int:
    """Number of ordered tuples ``(g1, ..., gn)`` of grid ratios, ``n <=
    max_len``, with ``g1 * ... * gn = m / base``.

    The true count is finite, so a large enough ``max_len`` is exact;
    if the search still has live branches when the length budget runs
    out, :class:`BudgetExhausted` is raised instead of returning a
    possibly short count.
    """
    one = m.one()
    target = m.div(g.base)
    ratios = sorted(g.ratios, reverse=True)
    overflow = [False]

    def admissible(d) -> bool:
        c = d.cmp(one)
        return c <= 0

    def count(defect, left: int) -> int:
        total = 1 if defect.is_one() else 0
        if left == 0:
            if not defect.is_one() and any(
                admissible(defect.div(r)) for r in ratios
            ):
                overflow[0] = True
            return total
        for r in ratios:
            child = defect.div(r)
            if admissible(child):
                total += count(child, left - 1)
        return total

    if not admissible(target):
        return 0
    n = count(target, max_len)
    if overflow[0]:
        raise BudgetExhausted(
            f"factorization search still live at length {max_len}"
        )
    return n


def in_grid(m, g: GridWitness, max_len: int = 24) -> bool:
    """Membership of ``m`` in the grid ``base * ratios*`` (budgeted)."""
    one = m.one()
    ratios = sorted(g.ratios, reverse=True)

    def reach(defect, left: int) -> bool:
        if defect.is_one():
            return True
        if left == 0:
            return False
        for r in ratios:
            child = defect.div(r)
            if child.cmp(one) <= 0 and reach(child, left - 1):
                return True
        return False

    return reach(m.div(g.base), max_len)


def levels(m) -> list:
    """Canonical level decomposition ``[(level, component), ...]``."""
    return m.levels()

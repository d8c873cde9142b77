"""Grid-based Hahn series as lazy, memoized term streams.

A :class:`Series` owns a stream of exact :class:`Term` values in
strictly decreasing monomial order together with a :class:`GridWitness`
bounding its support.  Streams are generators that yield either a
``Term`` or ``None``; a ``None`` is a *tick* -- bookkeeping that did not
produce a term (a cancellation, a heap rebalance, a factorization
probe).  Consumers charge ticks against a :class:`Budget`, so questions
that are undecidable for lazy data (is this stream zero? does it pass
this cut?) fail loudly with ``BudgetExhausted`` instead of hanging.

Emitted terms are cached, so a series may be consumed by many readers
and repeated queries are amortized.  Expansion mutates only the private
memo; the semantics are purely functional (single-threaded contract:
the memo append is not locked).

The one summation workhorse is :func:`graded_sum`: it merges a possibly
infinite family of series given with non-increasing support bounds,
admitting members on demand.  Finite merges, geometric sums ``sum h_n
eps^n``, multivariate power-series evaluation and the Neumann operator
tails in :mod:`hahnfield.diffop` are all instances.
"""

from __future__ import annotations

import heapq
import itertools
from dataclasses import dataclass
from fractions import Fraction
from math import factorial
from typing import Callable, Iterable, Iterator, Sequence

from .errors import BudgetExhausted, DomainError, NotSummable
from .monomial import GridWitness, _Rev, format_terms

Q = Fraction

DEFAULT_TICKS = 4096

_DONE = object()
_INF = object()  # admission bound: admit the member unconditionally


class Budget:
    """Mutable tick allowance shared across one logical query."""

    __slots__ = ("left",)

    def __init__(self, ticks: int = DEFAULT_TICKS):
        self.left = ticks

    def spend(self) -> None:
        self.left -= 1
        if self.left < 0:
            raise BudgetExhausted("work budget exhausted before certification")

    @staticmethod
    def ensure(b) -> "Budget":
        if b is None:
            return Budget()
        if isinstance(b, int):
            return Budget(b)
        return b


@dataclass(frozen=True)
class Term:
    """One exact term; the coefficient is nonzero by invariant."""

    coeff: Fraction
    mono: object

    def scale(self, c: Fraction) -> "Term":
        return Term(self.coeff * c, self.mono)

    def mul(self, other: "Term") -> "Term":
        return Term(self.coeff * other.coeff, self.mono.mul(other.mono))


class Series:
    """Lazily expanded series over an ordered monomial group.

    ``unit`` is the identity monomial of the ambient group (kept so the
    zero series still knows its space).  ``exact_finite`` is true when
    the stream is known to terminate, either by construction or because
    expansion already exhausted it.
    """

    __slots__ = ("unit", "witness", "_terms", "_gen", "_done", "_finite")

    def __init__(self, unit, gen=None, witness=None, finite=False, terms=()):
        self.unit = unit
        self._terms: list[Term] = list(terms)
        self._gen = gen
        self._done = gen is None
        self._finite = bool(finite) or gen is None
        if witness is None:
            witness = _tight_witness(unit, self._terms)
        self.witness = witness

    # -- constructors -----------------------------------------------------

    @staticmethod
    def from_terms(terms: Iterable, unit=None, witness=None) -> "Series":
        tl: list[Term] = []
        for t in terms:
            if not isinstance(t, Term):
                t = Term(Q(t[0]), t[1])
            if t.coeff != 0:
                tl.append(Term(Q(t.coeff), t.mono))
        tl.sort(key=lambda t: t.mono, reverse=True)
        merged: list[Term] = []
        for t in tl:
            if merged and merged[-1].mono == t.mono:
                c = merged[-1].coeff + t.coeff
                merged.pop()
                if c != 0:
                    merged.append(Term(c, t.mono))
            else:
                merged.append(t)
        if unit is None:
            if not merged:
                raise DomainError("cannot infer the group of an empty series")
            unit = merged[0].mono.one()
        return Series(unit, terms=merged, witness=witness)

    @staticmethod
    def zero(unit) -> "Series":
        return Series(unit)

    @staticmethod
    def constant(c, unit) -> "Series":
        c = Q(c)
        return Series(unit, terms=[Term(c, unit)] if c else [])

    @staticmethod
    def monomial(mono, coeff=1) -> "Series":
        return Series.from_terms([Term(Q(coeff), mono)], unit=mono.one())

    # -- stream plumbing ---------------------------------------------------

    @property
    def exact_finite(self) -> bool:
        return self._finite or self._done

    def _step(self):
        if self._done:
            return _DONE
        try:
            r = next(self._gen)
        except StopIteration:
            self._done = True
            self._gen = None
            return _DONE
        if r is None:
            return None
        if r.coeff == 0:
            raise RuntimeError("stream emitted a zero coefficient")
        if self._terms and not (r.mono < self._terms[-1].mono):
            raise RuntimeError("stream order violation")
        self._terms.append(r)
        return r

    def _raw_cursor(self):
        """Replay cached terms, then pull the shared generator; yields
        ``Term`` or ``None`` (tick), ends when the stream is complete.
        Every fresh pull costs one tick, so budgets bound total work
        even on streams that emit terms forever; replaying the memo is
        free."""
        i = 0
        while True:
            if i < len(self._terms):
                yield self._terms[i]
                i += 1
            elif self._done:
                return
            else:
                got = self._step()
                if got is _DONE:
                    return
                yield None

    def iter_terms(self, budget=None) -> Iterator[Term]:
        bud = Budget.ensure(budget)
        for t in self._raw_cursor():
            if t is None:
                bud.spend()
            else:
                yield t

    def terms(self, n: int | None = None, budget=None) -> list[Term]:
        out = []
        for t in self.iter_terms(budget):
            out.append(t)
            if n is not None and len(out) >= n:
                break
        return out

    def leading(self, budget=None) -> Term | None:
        """First term, or ``None`` for a certified-zero stream."""
        for t in self.iter_terms(budget):
            return t
        return None

    def is_zero(self, budget=None) -> bool:
        return self.leading(budget) is None

    def coeff_at(self, mono, budget=None) -> Fraction:
        for t in self.iter_terms(budget):
            c = t.mono.cmp(mono)
            if c == 0:
                return t.coeff
            if c < 0:
                return Q(0)
        return Q(0)

    # -- arithmetic ---------------------------------------------------------

    def _coerce(self, other) -> "Series":
        if isinstance(other, Series):
            return other
        return Series.constant(Q(other), self.unit)

    def __add__(self, other) -> "Series":
        other = self._coerce(other)
        members = iter([(self, _INF), (other, _INF)])
        return Series(
            self.unit,
            _graded_gen(members),
            witness=self.witness.union(other.witness),
            finite=self.exact_finite and other.exact_finite,
        )

    __radd__ = __add__

    def __neg__(self) -> "Series":
        return self.scale(-1)

    def __sub__(self, other) -> "Series":
        return self + (-self._coerce(other))

    def __rsub__(self, other) -> "Series":
        return self._coerce(other) + (-self)

    def scale(self, c) -> "Series":
        c = Q(c)
        if c == 0:
            return Series.zero(self.unit)
        if self._done:
            return Series(
                self.unit,
                terms=[t.scale(c) for t in self._terms],
                witness=self.witness,
            )

        def gen():
            for t in self._raw_cursor():
                yield t.scale(c) if t is not None else None

        return Series(self.unit, gen(), witness=self.witness,
                      finite=self.exact_finite)

    def shift(self, mono) -> "Series":
        """Multiply by a single monomial (order-preserving)."""
        if mono.is_one():
            return self

        def gen():
            for t in self._raw_cursor():
                yield Term(t.coeff, t.mono.mul(mono)) if t is not None else None

        return Series(self.unit, gen(), witness=self.witness.scaled(mono),
                      finite=self.exact_finite)

    def __mul__(self, other) -> "Series":
        if not isinstance(other, Series):
            return self.scale(other)
        return Series(
            self.unit,
            _mul_gen(self, other),
            witness=self.witness.product(other.witness),
            finite=self.exact_finite and other.exact_finite,
        )

    def __rmul__(self, other) -> "Series":
        return self.__mul__(other)

    def __pow__(self, n: int) -> "Series":
        if not isinstance(n, int):
            raise DomainError("series powers take integer exponents")
        if n < 0:
            return self.inverse() ** (-n)
        out = Series.constant(1, self.unit)
        for _ in range(n):
            out = out * self
        return out

    def __truediv__(self, other) -> "Series":
        if isinstance(other, Series):
            return self * other.inverse()
        return self.scale(Q(1) / Q(other))

    def inverse(self, budget=None) -> "Series":
        """Geometric inverse: write ``f = c*m*(1 - eps)`` with ``eps``
        infinitesimal and sum ``(c*m)^-1 * sum eps^n``."""
        bud = Budget.ensure(budget)
        lt = self.leading(bud)
        if lt is None:
            raise ZeroDivisionError("inverse of a zero series")
        c0, m0 = lt.coeff, lt.mono
        if self._done and len(self._terms) == 1:
            return Series.monomial(m0.inv(), Q(1) / c0)

        def eps_gen():
            first = True
            for t in self._raw_cursor():
                if t is None:
                    yield None
                    continue
                if first:
                    first = False
                    continue
                yield Term(-t.coeff / c0, t.mono.div(m0))

        ratios = set(self.witness.ratios)
        q = self.witness.base.div(m0)
        if q.is_one() is False and q.cmp(self.unit) < 0:
            ratios.add(q)
        eps = Series(self.unit, eps_gen(),
                     witness=GridWitness(self.unit, ratios),
                     finite=self.exact_finite)
        geom = geometric_sum(lambda n: Q(1), eps)
        return geom.scale(Q(1) / c0).shift(m0.inv())

    # -- truncation ----------------------------------------------------------

    def truncate(self, cut, budget=None) -> "Series":
        """Exact truncation: the terms with monomial strictly above
        ``cut``.  Eager; certifying the cut on an infinite stream may
        exhaust the budget."""
        kept: list[Term] = []
        for t in self.iter_terms(budget):
            if t.mono.cmp(cut) > 0:
                kept.append(t)
            else:
                break
        return Series(self.unit, terms=kept)

    def truncate_count(self, n: int, budget=None) -> "Series":
        return Series(self.unit, terms=self.terms(n, budget))

    def split_level(self, level: int, budget=None) -> dict:
        """Regroup as a series in the level->=``level`` components with
        lower-level coefficient series; requires a full scan."""
        groups: dict = {}
        for t in self.terms(None, budget):
            hi, lo = t.mono.level_split(level)
            groups.setdefault(hi, []).append(Term(t.coeff, lo))
        return {
            hi: Series(self.unit, terms=ts) for hi, ts in groups.items()
        }

    def truncate_at_level(self, level: int, cut, budget=None) -> "Series":
        """Coarse truncation: keep whole coefficient series of the
        level->=``level`` components above ``cut``."""
        hi_cut, lo_cut = cut.level_split(level)
        if not lo_cut.is_one():
            raise DomainError("cut must involve only levels >= the split level")

        def gen():
            for t in self._raw_cursor():
                if t is None:
                    yield None
                    continue
                hi, _ = t.mono.level_split(level)
                if hi.cmp(hi_cut) > 0:
                    yield t
                else:
                    return

        return Series(self.unit, gen(), witness=self.witness,
                      finite=self.exact_finite)

    # -- comparisons ----------------------------------------------------------

    def equals_exact(self, other: "Series", budget=None) -> bool:
        bud = Budget.ensure(budget)
        a = self.terms(None, bud)
        b = other.terms(None, bud)
        return a == b

    def agrees_with(self, other: "Series", monos: Sequence, budget=None) -> bool:
        """Coefficientwise agreement down to the smallest given monomial.

        Decided through the difference stream: its first emission either
        certifies a disagreement or certifies agreement above the cut.
        If the difference only ticks (an all-cancelling tail), running
        out of budget counts as agreement -- depth-bounded equality is
        budgeted, never decided for free.
        """
        cut = monos[0]
        for m in monos[1:]:
            if m.cmp(cut) < 0:
                cut = m
        diff = self - other
        try:
            lt = diff.leading(budget)
        except BudgetExhausted:
            return True
        return lt is None or lt.mono.cmp(cut) < 0

    def __str__(self) -> str:
        txt = format_terms([(t.coeff, t.mono) for t in self._terms])
        if not self._done:
            txt += " + ..." if self._terms else "..."
        return txt

    def __repr__(self) -> str:
        return f"Series({self})"


def _tight_witness(unit, terms: list[Term]) -> GridWitness:
    if not terms:
        return GridWitness(unit)
    base = terms[0].mono
    ratios = {t.mono.div(base) for t in terms[1:]}
    return GridWitness(base, ratios)


# ---------------------------------------------------------------------------
# stream combinators
# ---------------------------------------------------------------------------


class _Puller:
    """Indexed access into a series stream for the product heap."""

    __slots__ = ("cur", "buf", "done")

    _TICK = object()

    def __init__(self, s: Series):
        self.cur = s._raw_cursor()
        self.buf: list[Term] = []
        self.done = False

    def try_get(self, i: int):
        while len(self.buf) <= i:
            if self.done:
                return _DONE
            t = next(self.cur, _DONE)
            if t is _DONE:
                self.done = True
                return _DONE
            if t is None:
                return _Puller._TICK
            self.buf.append(t)
        return self.buf[i]


def _mul_gen(f: Series, g: Series):
    """Cauchy product by merging pairwise term products through a
    max-heap frontier over the index lattice.  Every coefficient is a
    finite sum (finite convolution fibers for reverse well-ordered
    supports), and the output is emitted in strictly decreasing order.
    """
    fp, gp = _Puller(f), _Puller(g)
    heap: list = []
    serial = itertools.count()
    pending: list[tuple[int, int]] = [(0, 0)]
    while True:
        if pending:
            i, j = pending[-1]
            ti = fp.try_get(i)
            if ti is _Puller._TICK:
                yield None
                continue
            if ti is _DONE:
                pending.pop()
                continue
            tj = gp.try_get(j)
            if tj is _Puller._TICK:
                yield None
                continue
            if tj is _DONE:
                pending.pop()
                continue
            heapq.heappush(
                heap,
                (_Rev(ti.mono.mul(tj.mono)), next(serial), i, j,
                 ti.coeff * tj.coeff),
            )
            pending.pop()
            continue
        if not heap:
            return
        top = heap[0][0].m
        total = Q(0)
        group: list[tuple[int, int]] = []
        while heap and heap[0][0].m == top:
            _, _, i, j, c = heapq.heappop(heap)
            total += c
            group.append((i, j))
        for i, j in group:
            pending.append((i, j + 1))
            if j == 0:
                pending.append((i + 1, 0))
        if total != 0:
            yield Term(total, top)
        else:
            yield None


def _graded_gen(members):
    """Sum a family of series.

    ``members`` is an iterator yielding ``None`` (tick) or a pair
    ``(series, bound)`` where ``bound`` is a monomial weakly above the
    member's support, or ``_INF`` to admit unconditionally.  Non-``_INF``
    bounds must be non-increasing; a term is emitted only once it
    dominates the bound of the next unadmitted member, so later members
    can never retro-contribute.
    """
    heap: list = []
    serial = itertools.count()
    pending: list = []
    upcoming = None
    mem_done = False
    last_bound = None
    while True:
        if pending:
            cur = pending[-1]
            t = next(cur, _DONE)
            if t is _DONE:
                pending.pop()
            elif t is None:
                yield None
            else:
                heapq.heappush(heap, (_Rev(t.mono), next(serial), t, cur))
                pending.pop()
            continue
        if upcoming is None and not mem_done:
            got = next(members, _DONE)
            if got is _DONE:
                mem_done = True
            elif got is None:
                yield None
            else:
                upcoming = got
            continue
        if upcoming is not None:
            s, bound = upcoming
            admit = bound is _INF or not heap or not (bound < heap[0][2].mono)
            if admit:
                if bound is not _INF:
                    if last_bound is not None and bound > last_bound:
                        raise DomainError("family bounds emitted out of order")
                    last_bound = bound
                pending.append(s._raw_cursor())
                upcoming = None
                continue
        if not heap:
            if mem_done and upcoming is None:
                return
            continue
        top = heap[0][2].mono
        total = Q(0)
        while heap and heap[0][2].mono == top:
            _, _, t, cur = heapq.heappop(heap)
            total += t.coeff
            pending.append(cur)
        if total != 0:
            yield Term(total, top)
        else:
            yield None


def graded_sum(members, unit, witness=None, finite=False) -> Series:
    """Series summing a (tickable) iterator of ``(series, bound)``."""
    if witness is None:
        witness = GridWitness(unit)
    return Series(unit, _graded_gen(members), witness=witness, finite=finite)


def merge_many(parts: Sequence[Series], witness=None) -> Series:
    """Sum of a finite family (k-way merge)."""
    parts = list(parts)
    if not parts:
        raise DomainError("empty merge needs an explicit zero; use Series.zero")
    unit = parts[0].unit
    if witness is None:
        witness = parts[0].witness
        for p in parts[1:]:
            witness = witness.union(p.witness)
    members = iter([(p, _INF) for p in parts])
    return Series(unit, _graded_gen(members), witness=witness,
                  finite=all(p.exact_finite for p in parts))


def geometric_sum(coeffs: Callable[[int], Fraction], eps: Series,
                  extra_witness=None) -> Series:
    """``sum_n coeffs(n) * eps^n`` for infinitesimal ``eps``.

    The family is summable because ``eps^n`` is supported weakly below
    the n-th power of its leading monomial, which strictly decreases.
    """
    unit = eps.unit

    def members():
        c0 = Q(coeffs(0))
        yield (Series.constant(c0, unit), unit)
        cur = eps._raw_cursor()
        head = None
        while True:
            t = next(cur, _DONE)
            if t is _DONE:
                return
            if t is None:
                yield None
                continue
            head = t
            break
        if head.mono.cmp(unit) >= 0:
            raise NotSummable("geometric ratio is not infinitesimal")
        lead = head.mono
        pows = [Series.constant(1, unit), eps]
        bound = unit
        n = 1
        while True:
            bound = bound.mul(lead)
            while len(pows) <= n:
                pows.append(pows[-1] * eps)
            cn = Q(coeffs(n))
            member = pows[n].scale(cn) if cn else Series.zero(unit)
            yield (member, bound)
            n += 1

    ratios = set(eps.witness.ratios)
    if eps.witness.base.cmp(unit) < 0:
        ratios.add(eps.witness.base)
    wit = GridWitness(unit, ratios)
    if extra_witness is not None:
        wit = wit.product(extra_witness)
    return graded_sum(members(), unit, witness=wit)


# ---------------------------------------------------------------------------
# summable-family descriptors
# ---------------------------------------------------------------------------


@dataclass
class Geometric:
    """Family ``h_n * eps^n`` with scalar ``h_n`` and ``eps`` < 1."""

    coeffs: Callable[[int], Fraction]
    eps: Series


@dataclass
class GridIndexed:
    """Family ``c(g) * g`` indexed by the monomials of a grid."""

    witness: GridWitness
    coeff: Callable[[object], Fraction]


def sum_family(desc, unit=None) -> Series:
    """Sum a summable family given by descriptor.

    Accepts a finite list of series, a :class:`Geometric` family, or a
    :class:`GridIndexed` family with a common witness.
    """
    if isinstance(desc, (list, tuple)):
        if not desc:
            if unit is None:
                raise DomainError("empty family needs a unit monomial")
            return Series.zero(unit)
        return merge_many(list(desc))
    if isinstance(desc, Geometric):
        return geometric_sum(desc.coeffs, desc.eps)
    if isinstance(desc, GridIndexed):
        w = desc.witness
        u = w.base.one()

        def members():
            for g in w.iter_grid():
                c = Q(desc.coeff(g))
                member = (
                    Series.from_terms([Term(c, g)], unit=u)
                    if c
                    else Series.zero(u)
                )
                yield (member, g)

        return graded_sum(members(), u, witness=w)
    raise NotSummable(f"unrecognized family descriptor: {desc!r}")


# ---------------------------------------------------------------------------
# formal power series in several variables and their evaluation
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class PowerSeriesN:
    """Formal power series in ``arity`` variables via a total
    coefficient oracle ``multi-index -> Fraction``."""

    arity: int
    coeff: Callable[[tuple[int, ...]], Fraction]
    name: str = ""

    def at(self, idx: tuple[int, ...]) -> Fraction:
        return Q(self.coeff(idx))

    def partial(self, i: int) -> "PowerSeriesN":
        def d(idx: tuple[int, ...]) -> Fraction:
            k = list(idx)
            k[i] += 1
            return Q(self.coeff(tuple(k))) * (k[i])

        return PowerSeriesN(self.arity, d, name=f"D{i}[{self.name}]")


EXP_SERIES = PowerSeriesN(1, lambda k: Q(1, factorial(k[0])), "exp(X)")
GEOM_SERIES = PowerSeriesN(1, lambda k: Q((-1) ** k[0]), "(1+X)^-1")
LOG1P_SERIES = PowerSeriesN(
    1, lambda k: Q(0) if k[0] == 0 else Q((-1) ** (k[0] + 1), k[0]), "log(1+X)"
)


def _compositions(total: int, parts: int):
    if parts == 1:
        yield (total,)
        return
    for head in range(total + 1):
        for rest in _compositions(total - head, parts - 1):
            yield (head,) + rest


def eval_ps(F: PowerSeriesN, args: Sequence[Series], budget=None) -> Series:
    """Evaluate ``F`` at infinitesimal series arguments as the graded
    sum of its homogeneous parts."""
    if len(args) != F.arity:
        raise DomainError(f"{F.name or 'series'} expects {F.arity} arguments")
    bud = Budget.ensure(budget)
    unit = args[0].unit
    live: list[int] = []
    leads: list = []
    for i, a in enumerate(args):
        lt = a.leading(bud)
        if lt is None:
            continue
        if lt.mono.cmp(unit) >= 0:
            raise DomainError("power-series argument is not infinitesimal")
        live.append(i)
        leads.append(lt.mono)
    zero_idx = (0,) * F.arity
    if not live:
        return Series.constant(F.at(zero_idx), unit)
    mu = leads[0]
    for m in leads[1:]:
        if m.cmp(mu) > 0:
            mu = m
    pows: dict[int, list[Series]] = {
        i: [Series.constant(1, unit), args[i]] for i in live
    }

    def product_for(idx: tuple[int, ...]) -> Series:
        out = None
        for pos, k in zip(live, idx):
            while len(pows[pos]) <= k:
                pows[pos].append(pows[pos][-1] * args[pos])
            if k == 0:
                continue
            p = pows[pos][k]
            out = p if out is None else out * p
        return out if out is not None else Series.constant(1, unit)

    def members():
        d = 0
        bound = unit
        while True:
            parts: list[Series] = []
            for idx in _compositions(d, len(live)):
                full = [0] * F.arity
                for pos, k in zip(live, idx):
                    full[pos] = k
                c = F.at(tuple(full))
                if c == 0:
                    continue
                parts.append(product_for(idx).scale(c))
            member = merge_many(parts) if parts else Series.zero(unit)
            yield (member, bound)
            d += 1
            bound = bound.mul(mu)

    ratios: set = set()
    for i in live:
        w = args[i].witness
        ratios |= set(w.ratios)
        if w.base.cmp(unit) < 0:
            ratios.add(w.base)
    for m in leads:
        ratios.add(m)
    return graded_sum(members(), unit, witness=GridWitness(unit, ratios))


# ---------------------------------------------------------------------------
# spec-facing functional aliases
# ---------------------------------------------------------------------------


def add(f: Series, g: Series) -> Series:
    return f + g


def mul(f: Series, g: Series) -> Series:
    return f * g


def truncate(f: Series, cut, budget=None) -> Series:
    return f.truncate(cut, budget)


def leading(f: Series, budget=None):
    return f.leading(budget)


def invert(f: Series, budget=None) -> Series:
    return f.inverse(budget)


def split_level(f: Series, level: int, budget=None) -> dict:
    return f.split_level(level, budget)


def truncate_at_level(f: Series, level: int, cut, budget=None) -> Series:
    return f.truncate_at_level(level, cut, budget)

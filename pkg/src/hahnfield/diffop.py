"""Derivations induced by additive c-maps and the small-operator algebra.

A c-map sends each monomial generator to a coefficient series and
extends additively over products; the induced derivation acts termwise,
``d(c*m) = c * cval(m) * m``.  Operators built from ``a * d`` are kept
as symbolic descriptors (sums, compositions, Neumann inverses) so their
support-shift witnesses can be combined structurally.

``(I - a*d)^-1 = sum_n (a*d)^n`` is evaluated demand-driven: member
``n+1`` is admitted only once the merge needs terms at or below its
leading monomial.  Smallness is enforced dynamically -- successive
member leads must strictly decrease -- so a non-small operator raises
``NotSmall`` instead of looping.
"""

from __future__ import annotations

import itertools
from fractions import Fraction
from functools import lru_cache

from .errors import DomainError, NotSmall
from .monomial import GridWitness, Group, Monomial
from .series import (
    Budget,
    Series,
    Term,
    _DONE,
    _graded_gen,
    merge_many,
)

Q = Fraction


class DerivationSpec:
    """Derivation on a declared-group Hahn field from a finite c-map.

    ``cmap`` assigns each generator a (finite) series value; products of
    generators get the exponent-weighted sum, matching additivity.  The
    base-field derivation on the exact rational coefficients is trivial.
    A generator of level ``n`` may only map into levels below ``n``.
    """

    def __init__(self, group: Group, cmap: dict, budget=None):
        self.group = group
        self.cmap: dict = {}
        for gid, val in cmap.items():
            if gid not in group._key_of:
                raise DomainError(f"c-map key {gid} is not a declared generator")
            if not isinstance(val, Series):
                val = Series.constant(val, group.one)
            val = Series.from_terms(val.terms(None, budget), unit=group.one)
            for t in val._terms:
                if t.mono.max_level() >= gid.level and not t.mono.is_one():
                    raise DomainError(
                        f"c({gid.name}) must involve only levels below {gid.level}"
                    )
            self.cmap[gid] = val

    def c_value(self, mono: Monomial) -> Series:
        """Additive extension: c(prod g^e) = sum e * c(g)."""
        acc: dict = {}
        for level, rank, e in mono.exps:
            gid = self.group._gen_of[(level, rank)]
            if gid not in self.cmap:
                raise DomainError(f"no c-map entry for generator {gid.name}")
            for t in self.cmap[gid]._terms:
                acc[t.mono] = acc.get(t.mono, Q(0)) + e * t.coeff
        return Series.from_terms(
            [Term(c, m) for m, c in acc.items() if c], unit=self.group.one
        )

    def shift_witness(self) -> GridWitness:
        """Grid containing every c-value monomial; bounds supp(df) inside
        supp(f) times this grid."""
        monos = {t.mono for v in self.cmap.values() for t in v._terms}
        one = self.group.one
        if not monos:
            return GridWitness(one)
        base = max(monos)
        ratios = {m.div(base) for m in monos if m != base}
        return GridWitness(base, ratios)

    def is_transerial(self, budget=None) -> bool:
        """True iff every declared generator above level 0 has a purely
        infinite c-value (leading monomial > 1)."""
        one = self.group.one
        for gid, val in self.cmap.items():
            if gid.level < 1:
                continue
            lt = val.leading(budget)
            if lt is None or lt.mono.cmp(one) <= 0:
                return False
        return True


def xddx(group: Group, name: str = "x") -> DerivationSpec:
    """The derivation x*d/dx on a group whose level-0 generator is x:
    c(x^q) = q, all other generators must get explicit entries."""
    gid = next(g for g in group.generators if g.name == name)
    return DerivationSpec(group, {gid: Series.constant(1, group.one)})


def derive(f: Series, D, budget=None) -> Series:
    """Termwise derivation: each term ``c*m`` contributes ``c*cval(m)*m``.

    The contributions are admitted in term order with their leading
    monomials as bounds.  Level-n generators map into levels below n,
    which keeps those bounds non-increasing along the stream; the merge
    checks that contract and fails loudly if a c-map breaks it."""

    def members():
        for t in f._raw_cursor():
            if t is None:
                yield None
                continue
            img = _term_image(t, D, f.unit)
            if img is not None:
                yield (img, img._terms[0].mono)

    return Series(
        f.unit,
        _graded_gen(members()),
        witness=f.witness.product(D.shift_witness()),
        finite=f.exact_finite,
    )


def _term_image(t: Term, D, unit) -> Series | None:
    cv = D.c_value(t.mono)
    ts = [Term(t.coeff * u.coeff, u.mono.mul(t.mono)) for u in cv._terms]
    return Series(unit, terms=ts) if ts else None


def log_derivative(f: Series, D, budget=None) -> Series:
    return derive(f, D, budget) * f.inverse(budget)


# ---------------------------------------------------------------------------
# differential polynomials and the G^n_m family
# ---------------------------------------------------------------------------


class DiffPoly:
    """Integer polynomial in X, X', X'', ...; keys are exponent tuples
    over the derivative orders, values integer coefficients."""

    __slots__ = ("terms",)

    def __init__(self, terms: dict[tuple[int, ...], int] | None = None):
        clean: dict[tuple[int, ...], int] = {}
        for k, v in (terms or {}).items():
            if v:
                clean[_trim(k)] = v
        self.terms = clean

    @staticmethod
    def zero() -> "DiffPoly":
        return DiffPoly()

    @staticmethod
    def var(order: int = 0, power: int = 1) -> "DiffPoly":
        key = [0] * (order + 1)
        key[order] = power
        return DiffPoly({tuple(key): 1})

    def is_zero(self) -> bool:
        return not self.terms

    def __add__(self, other: "DiffPoly") -> "DiffPoly":
        out = dict(self.terms)
        for k, v in other.terms.items():
            out[k] = out.get(k, 0) + v
        return DiffPoly(out)

    def __mul__(self, other: "DiffPoly") -> "DiffPoly":
        out: dict[tuple[int, ...], int] = {}
        for ka, va in self.terms.items():
            for kb, vb in other.terms.items():
                k = _trim(
                    tuple(
                        a + b
                        for a, b in itertools.zip_longest(ka, kb, fillvalue=0)
                    )
                )
                out[k] = out.get(k, 0) + va * vb
        return DiffPoly(out)

    def formal_derive(self) -> "DiffPoly":
        out: dict[tuple[int, ...], int] = {}
        for k, v in self.terms.items():
            for i, e in enumerate(k):
                if not e:
                    continue
                nk = list(k) + [0]
                nk[i] -= 1
                nk[i + 1] += 1
                nk = _trim(tuple(nk))
                out[nk] = out.get(nk, 0) + v * e
        return DiffPoly(out)

    def degree(self) -> int:
        return max((sum(k) for k in self.terms), default=0)

    def evaluate(self, a: Series, D, budget=None) -> Series:
        """Substitute X^(i) -> the i-th derivative of ``a``."""
        if not self.terms:
            return Series.zero(a.unit)
        max_order = max(len(k) for k in self.terms) - 1
        das = [a]
        for _ in range(max_order):
            das.append(derive(das[-1], D, budget))
        parts = []
        for k, v in self.terms.items():
            acc = Series.constant(v, a.unit)
            for i, e in enumerate(k):
                for _ in range(e):
                    acc = acc * das[i]
            parts.append(acc)
        return merge_many(parts)

    def __eq__(self, other) -> bool:
        return isinstance(other, DiffPoly) and other.terms == self.terms

    def __hash__(self) -> int:
        return hash(frozenset(self.terms.items()))

    def __repr__(self) -> str:
        if not self.terms:
            return "0"
        names = ["X", "X'", "X''"] + [f"X({i})" for i in range(3, 12)]
        chunks = []
        for k in sorted(self.terms, key=lambda k: (sum(k), k), reverse=True):
            v = self.terms[k]
            factors = []
            for i, e in enumerate(k):
                if e == 1:
                    factors.append(names[i])
                elif e > 1:
                    factors.append(f"{names[i]}^{e}")
            body = "*".join(factors) or "1"
            chunks.append(body if v == 1 else f"{v}*{body}")
        return " + ".join(chunks)


def _trim(k: tuple[int, ...]) -> tuple[int, ...]:
    while k and k[-1] == 0:
        k = k[:-1]
    return k


@lru_cache(maxsize=None)
def gnm(n: int, m: int) -> DiffPoly:
    """The coefficient polynomials of ``(a*d)^n = sum_m G^n_m(a) d^m``:
    G^n_0 = 0, G^n_n = X^n, G^{n+1}_m = X*(G^n_m' + G^n_{m-1})."""
    if n < 1 or m < 0 or m > n:
        raise DomainError(f"G^{n}_{m} is undefined")
    if m == 0:
        return DiffPoly.zero()
    if m == n:
        return DiffPoly.var(0, n)
    prev = gnm(n - 1, m)
    lower = gnm(n - 1, m - 1) if m >= 1 else DiffPoly.zero()
    return DiffPoly.var(0) * (prev.formal_derive() + lower)


# ---------------------------------------------------------------------------
# operator algebra
# ---------------------------------------------------------------------------


class Operator:
    """Symbolic additive operator on the series space.

    Kinds: ``zero``, ``ident``, ``aderive`` (multiply by ``a`` after
    deriving), ``sum``, ``compose`` (left-to-right is outer-to-inner),
    and ``neumann`` (the inverse ``(I-P)^-1``)."""

    def __init__(self, kind: str, *, a=None, D=None, parts=()):
        self.kind = kind
        self.a = a
        self.D = D
        self.parts = tuple(parts)

    # -- constructors --

    @staticmethod
    def zero() -> "Operator":
        return Operator("zero")

    @staticmethod
    def identity() -> "Operator":
        return Operator("ident")

    @staticmethod
    def aderive(a: Series, D) -> "Operator":
        return Operator("aderive", a=a, D=D)

    # -- behaviour --

    def apply(self, f: Series, budget=None) -> Series:
        if self.kind == "zero":
            return Series.zero(f.unit)
        if self.kind == "ident":
            return f
        if self.kind == "aderive":
            return self.a * derive(f, self.D, budget)
        if self.kind == "sum":
            if not self.parts:
                return Series.zero(f.unit)
            return merge_many([p.apply(f, budget) for p in self.parts])
        if self.kind == "compose":
            out = f
            for p in reversed(self.parts):
                out = p.apply(out, budget)
            return out
        if self.kind == "neumann":
            return _neumann_apply(self.parts[0], f, budget)
        raise DomainError(f"unknown operator kind {self.kind}")

    def witness(self, budget=None) -> GridWitness | None:
        """Support-shift bound: supp(P f) lies in witness * supp(f).
        ``None`` for the zero operator (empty shift set)."""
        if self.kind == "zero":
            return None
        if self.kind == "ident":
            return GridWitness(self._unit())
        if self.kind == "aderive":
            return self.a.witness.product(self.D.shift_witness())
        if self.kind == "sum":
            ws = [p.witness(budget) for p in self.parts]
            ws = [w for w in ws if w is not None]
            if not ws:
                return None
            out = ws[0]
            for w in ws[1:]:
                out = out.union(w)
            return out
        if self.kind == "compose":
            out = None
            for p in self.parts:
                w = p.witness(budget)
                if w is None:
                    return None
                out = w if out is None else out.product(w)
            return out
        if self.kind == "neumann":
            inner = self.parts[0].witness(budget)
            return inner.star() if inner is not None else None
        raise DomainError(f"unknown operator kind {self.kind}")

    def _unit(self):
        if self.kind == "aderive":
            return self.a.unit
        for p in self.parts:
            u = p._unit()
            if u is not None:
                return u
        return None

    def is_small(self, budget=None) -> bool:
        """Smallness check.  For ``a*d`` the leading monomial of ``a``
        shifted by the c-value grid must be infinitesimal; structural
        witnesses decide the rest."""
        if self.kind == "zero":
            return True
        if self.kind == "ident":
            return False
        if self.kind == "aderive":
            lt = self.a.leading(budget)
            if lt is None:
                return True
            shift = self.D.shift_witness()
            one = self.a.unit
            return lt.mono.mul(shift.base).cmp(one) < 0
        if self.kind == "sum":
            return all(p.is_small(budget) for p in self.parts)
        if self.kind == "compose":
            real = [p for p in self.parts if p.kind != "ident"]
            if not real:
                return False
            return all(p.is_small(budget) or p.kind == "zero" for p in real)
        if self.kind == "neumann":
            return False  # contains the identity summand
        raise DomainError(f"unknown operator kind {self.kind}")


def op_add(p: Operator, q: Operator) -> Operator:
    return Operator("sum", parts=(p, q))


def op_compose(p: Operator, q: Operator) -> Operator:
    return Operator("compose", parts=(p, q))


def neumann_inverse(p: Operator, budget=None) -> Operator:
    """The inverse of ``I - p`` as an operator, for small ``p``."""
    if not p.is_small(budget):
        raise NotSmall("Neumann inversion needs a small operator")
    w = p.witness(budget)
    if w is not None and not w.all_infinitesimal():
        # witness may over-approximate; the dynamic check in the
        # summation still guards correctness
        pass
    if p.kind == "zero":
        return Operator.identity()
    return Operator("neumann", parts=(p,))


def _neumann_apply(P: Operator, f: Series, budget=None) -> Series:
    """``sum_n P^n(f)`` with member admission driven by actual leading
    monomials; raises ``NotSmall`` if the leads fail to descend."""

    def members():
        cur = f
        prev_lead = None
        while True:
            cursor = cur._raw_cursor()
            head = None
            while True:
                t = next(cursor, _DONE)
                if t is _DONE:
                    return  # certified-zero member; the tail vanishes
                if t is None:
                    yield None
                    continue
                head = t
                break
            if prev_lead is not None and not (head.mono < prev_lead):
                raise NotSmall(
                    "operator fails to shrink supports; (I-P)^-1 diverges"
                )
            prev_lead = head.mono
            yield (cur, head.mono)
            cur = P.apply(cur)

    wit = f.witness
    pw = P.witness()
    if pw is not None and pw.all_infinitesimal():
        wit = f.witness.product(pw.star())
    return Series(f.unit, _graded_gen(members()), witness=wit)


# ---------------------------------------------------------------------------
# the linear equation y - a*dy = f and its expansions
# ---------------------------------------------------------------------------


def solve_linear(a: Series, f: Series, D, budget=None) -> Series:
    """Unique solution of ``y - a*dy = f`` as ``sum_n (a d)^n f``."""
    op = Operator.aderive(a, D)
    lt = a.leading(budget)
    if lt is not None and lt.mono.cmp(a.unit) >= 0:
        raise NotSmall("coefficient a must be infinitesimal")
    if lt is None:
        return f
    return _neumann_apply(op, f, budget)


def expand_gnm(a: Series, f: Series, N: int, D, budget=None) -> Series:
    """Partial sum ``f + sum_{n<=N} sum_m G^n_m(a) d^m(f)`` of the
    closed-form inverse expansion."""
    lt = a.leading(budget)
    if lt is not None and lt.mono.cmp(a.unit) >= 0:
        raise NotSmall("coefficient a must be infinitesimal")
    parts = [f]
    dfs = [f]
    for _ in range(N):
        dfs.append(derive(dfs[-1], D, budget))
    for n in range(1, N + 1):
        for m in range(1, n + 1):
            poly = gnm(n, m)
            if poly.is_zero():
                continue
            parts.append(poly.evaluate(a, D, budget) * dfs[m])
    return merge_many(parts)


def decompose_PQ(a: Series, cutpoint, f: Series, M: int, D, budget=None) -> Series:
    """Split ``a*d = P + Q`` at a truncation point and sum
    ``sum_{m<=M} (I-P)^-1 (Q (I-P)^-1)^m (f)``; an independent route to
    the same solution."""
    lt = a.leading(budget)
    if lt is not None and lt.mono.cmp(a.unit) >= 0:
        raise NotSmall("coefficient a must be infinitesimal")
    a1 = a.truncate(cutpoint, budget)
    a2 = a - a1
    P = Operator.aderive(a1, D) if a1._terms else Operator.zero()
    Qop = Operator.aderive(a2, D)
    # rely on the a < 1 check plus the dynamic divergence guard rather
    # than the witness-based constructor check: a1 is a truncation of a
    R = Operator("neumann", parts=(P,)) if P.kind != "zero" else Operator.identity()
    term = R.apply(f, budget)
    parts = [term]
    for _ in range(M):
        term = R.apply(Qop.apply(term, budget), budget)
        parts.append(term)
    return merge_many(parts)


def is_transerial(D, budget=None) -> bool:
    return D.is_transerial(budget)

import random
from fractions import Fraction as Q
from math import factorial

import pytest

from hahnfield.errors import BudgetExhausted, DomainError
from hahnfield.monomial import GridWitness, Group
from hahnfield.series import (
    Budget,
    EXP_SERIES,
    GEOM_SERIES,
    Geometric,
    GridIndexed,
    LOG1P_SERIES,
    PowerSeriesN,
    Series,
    Term,
    eval_ps,
    sum_family,
)

G = Group([("x", 0), ("e", 1)])
X = G.gen("x")
E = G.gen("e")
ONE = G.one


def S(*pairs):
    return Series.from_terms([Term(Q(c), m) for c, m in pairs], unit=ONE)


def xpow(r):
    return X.ppow(Q(r))


def rand_series(rng, nterms=4, levels=False):
    monos = set()
    while len(monos) < nterms:
        e = Q(rng.randint(-6, 6), rng.choice([1, 1, 2]))
        m = xpow(e)
        if levels and rng.random() < 0.4:
            m = m.mul(E.ppow(rng.randint(-2, 2)))
        monos.add(m)
    return Series.from_terms(
        [Term(Q(rng.randint(-5, 5)) or Q(1), m) for m in monos], unit=ONE
    )


# -- add / mul ---------------------------------------------------------------


def test_add_cancellation():
    f = S((1, X), (1, ONE))
    g = S((-1, ONE))
    assert (f + g).terms() == [Term(Q(1), X)]


def test_add_identity():
    f = S((2, X), (3, xpow(-1)))
    assert (f + Series.zero(ONE)).terms() == f.terms()


def test_add_symmetric_cancellation():
    f = S((1, ONE), (1, xpow(-1)))
    g = S((1, ONE), (-1, xpow(-1)))
    assert (f + g).terms() == [Term(Q(2), ONE)]


def test_mul_difference_of_squares():
    f = S((1, ONE), (1, xpow(-1)))
    g = S((1, ONE), (-1, xpow(-1)))
    assert (f * g).terms() == [Term(Q(1), ONE), Term(Q(-1), xpow(-2))]


def test_mul_identity():
    f = S((2, X), (1, ONE), (-3, xpow(-2)))
    assert (f * Series.constant(1, ONE)).terms() == f.terms()


def test_mul_binomial():
    f = S((1, X), (1, ONE))
    assert (f * f).terms() == [
        Term(Q(1), xpow(2)),
        Term(Q(2), X),
        Term(Q(1), ONE),
    ]


def test_ring_axioms_to_depth_on_random_series():
    rng = random.Random(3)
    for _ in range(15):
        f, g, h = (rand_series(rng) for _ in range(3))
        d = 6
        lhs = (f * (g + h)).terms(d)
        rhs = (f * g + f * h).terms(d)
        assert lhs == rhs
        assert ((f * g) * h).terms(d) == (f * (g * h)).terms(d)
        assert (f * g).terms(d) == (g * f).terms(d)


# -- truncation ---------------------------------------------------------------


def test_truncate_examples():
    f = S((1, X), (1, ONE), (1, xpow(-1)))
    assert f.truncate(ONE).terms() == [Term(Q(1), X)]
    assert f.truncate(X).terms() == []
    assert f.truncate(xpow(-1)).terms() == [Term(Q(1), X), Term(Q(1), ONE)]


def test_truncate_is_additive_and_idempotent():
    rng = random.Random(9)
    for _ in range(20):
        f, g = rand_series(rng), rand_series(rng)
        cut = xpow(rng.randint(-4, 4))
        lhs = (f + g).truncate(cut)
        rhs = f.truncate(cut) + g.truncate(cut)
        assert lhs.terms() == rhs.terms()
        tf = f.truncate(cut)
        assert tf.truncate(cut).terms() == tf.terms()


def test_truncate_monotone():
    f = S((1, xpow(2)), (1, X), (1, ONE), (1, xpow(-1)))
    lo = f.truncate(xpow(-1))
    hi = f.truncate(X)
    # the coarser truncation is a truncation of the finer one
    assert lo.terms()[: len(hi.terms())] == hi.terms()


def test_truncate_budget_on_lazy_stream():
    f = S((1, X), (-1, ONE)).inverse()  # infinite stream of x-powers
    with pytest.raises(BudgetExhausted):
        f.truncate(E.inv(), Budget(200))


# -- leading / invert ---------------------------------------------------------


def test_leading_cases():
    assert S((1, X), (1, ONE)).leading() == Term(Q(1), X)
    assert Series.zero(ONE).leading() is None
    f = S((1, X), (1, ONE)) - S((1, X)) - Series.constant(1, ONE)
    assert f.leading() is None  # exact cancellation certifies zero


def test_invert_multiplies_back_to_one():
    f = S((1, X), (-1, ONE))
    inv = f.inverse()
    # independent check through the first 5 grid points of the result
    grid = inv.witness.prefix(5)
    prod = f * inv
    one = Series.constant(1, ONE)
    assert prod.agrees_with(one, grid)
    assert inv.terms(3) == [
        Term(Q(1), xpow(-1)),
        Term(Q(1), xpow(-2)),
        Term(Q(1), xpow(-3)),
    ]


def test_invert_trivialities():
    assert Series.constant(1, ONE).inverse().terms() == [Term(Q(1), ONE)]
    assert S((2, X)).inverse().terms() == [Term(Q(1, 2), xpow(-1))]
    with pytest.raises(ZeroDivisionError):
        Series.zero(ONE).inverse()


def test_invert_random_roundtrip():
    rng = random.Random(21)
    for _ in range(10):
        f = rand_series(rng)
        prod = f * f.inverse()
        one = Series.constant(1, ONE)
        grid = prod.witness.prefix(6)
        assert prod.agrees_with(one, grid, Budget(20000))


# -- summable families --------------------------------------------------------


def test_sum_family_finite():
    assert sum_family([S((1, X)), S((1, ONE)), S((-1, X))]).terms() == [
        Term(Q(1), ONE)
    ]
    assert sum_family([], unit=ONE).terms() == []


def test_sum_family_geometric_matches_inverse():
    geo = sum_family(Geometric(lambda n: Q(1), S((1, xpow(-1)))))
    inv = (Series.constant(1, ONE) - S((1, xpow(-1)))).inverse()
    assert geo.terms(6) == inv.terms(6)


def test_sum_family_grid_indexed():
    w = GridWitness(ONE, [xpow(-1)])
    fam = sum_family(GridIndexed(w, lambda m: Q(1)))
    assert fam.terms(4) == [
        Term(Q(1), ONE),
        Term(Q(1), xpow(-1)),
        Term(Q(1), xpow(-2)),
        Term(Q(1), xpow(-3)),
    ]


# -- power series evaluation ---------------------------------------------------


def test_eval_exp_factorial_sums():
    arg = S((1, xpow(-1)))
    f = eval_ps(EXP_SERIES, [arg])
    expected = [Term(Q(1, factorial(k)), xpow(-k)) for k in range(5)]
    assert f.terms(5) == expected


def test_eval_at_zero_gives_constant():
    for F in (EXP_SERIES, GEOM_SERIES, LOG1P_SERIES):
        v = eval_ps(F, [Series.zero(ONE)])
        assert v.terms() == ([Term(F.at((0,)), ONE)] if F.at((0,)) else [])


def test_eval_geom_multiplies_back():
    arg = S((1, xpow(-1)))
    f = eval_ps(GEOM_SERIES, [arg])
    prod = f * (Series.constant(1, ONE) + arg)
    one = Series.constant(1, ONE)
    assert prod.agrees_with(one, prod.witness.prefix(5))
    assert f.terms(3) == [
        Term(Q(1), ONE),
        Term(Q(-1), xpow(-1)),
        Term(Q(1), xpow(-2)),
    ]


def test_eval_rejects_large_argument():
    with pytest.raises(DomainError):
        eval_ps(EXP_SERIES, [S((1, X))])


def test_eval_two_variable_oracle():
    # F = 1/((1-X)(1-Y)) has coefficients all 1
    F = PowerSeriesN(2, lambda k: Q(1), "geom2")
    a, b = S((1, xpow(-1))), S((1, xpow(-2)))
    v = eval_ps(F, [a, b])
    lhs = (Series.constant(1, ONE) - a).inverse() * (
        Series.constant(1, ONE) - b
    ).inverse()
    assert v.terms(8) == lhs.terms(8)


def test_taylor_splitting_identity():
    # F(f) = sum_n F^(n)(h) g^n / n! for the split f = h + g at a cut
    rng = random.Random(31)
    for F in (GEOM_SERIES, EXP_SERIES):
        for _ in range(5):
            f = Series.from_terms(
                [
                    Term(Q(rng.randint(1, 4)), xpow(-1)),
                    Term(Q(rng.randint(1, 4)), xpow(-2)),
                    Term(Q(rng.randint(1, 4)), xpow(-3)),
                ],
                unit=ONE,
            )
            h = f.truncate(xpow(-2))
            g = f - h
            direct = eval_ps(F, [f])
            Fn = F
            parts = []
            for n in range(7):
                coeff = Q(1, factorial(n))
                parts.append(eval_ps(Fn, [h]) * (g**n) * coeff)
                Fn = Fn.partial(0)
            taylor = parts[0]
            for p in parts[1:]:
                taylor = taylor + p
            d = 6
            assert direct.terms(d) == taylor.terms(d, Budget(100000))


# -- level split and the two truncation notions --------------------------------


def test_split_level_regroups():
    f = S((1, X.mul(E)), (1, E), (1, xpow(-1)))
    sp = f.split_level(1)
    assert set(sp) == {E, ONE}
    assert sp[E].terms() == [Term(Q(1), X), Term(Q(1), ONE)]
    assert sp[ONE].terms() == [Term(Q(1), xpow(-1))]
    assert Series.zero(ONE).split_level(1) == {}
    g = S((1, X), (2, ONE))
    assert g.split_level(1) == {ONE: g} or g.split_level(1)[ONE].terms() == g.terms()


def test_truncate_at_level_keeps_whole_coefficients():
    f = S((1, X.mul(E)), (1, E), (1, xpow(-1)))
    kept = f.truncate_at_level(1, ONE)
    assert kept.terms() == [Term(Q(1), X.mul(E)), Term(Q(1), E)]
    assert f.truncate_at_level(1, E).terms() == []
    g = S((1, X), (2, ONE))
    assert g.truncate_at_level(1, ONE).terms() == []
    with pytest.raises(DomainError):
        f.truncate_at_level(1, X)


def _rand_two_level(rng):
    terms = []
    for k in range(rng.randint(2, 4)):
        hi = E.ppow(rng.randint(-2, 2))
        for _ in range(rng.randint(1, 3)):
            lo = xpow(rng.randint(-3, 3))
            terms.append(Term(Q(rng.randint(-4, 4)) or Q(1), hi.mul(lo)))
    return Series.from_terms(terms, unit=ONE)


def test_inner_truncation_is_an_outer_truncation():
    # every coarse truncation is realized as a plain truncation at a
    # computable cut point
    rng = random.Random(41)
    for _ in range(25):
        f = _rand_two_level(rng)
        cut_hi = E.ppow(rng.randint(-2, 2))
        inner = f.truncate_at_level(1, cut_hi)
        same_hi = [t.mono for t in f.terms() if t.mono.level_split(1)[0] == cut_hi]
        outer_cut = same_hi[0] if same_hi else cut_hi
        outer = f.truncate(outer_cut)
        assert inner.terms() == outer.terms()


def test_outer_truncation_from_inner_plus_coefficient_cut():
    # when a plain truncation splits one coefficient series, it equals
    # the coarse truncation plus a truncation of that one coefficient
    rng = random.Random(43)
    checked = 0
    for _ in range(40):
        f = _rand_two_level(rng)
        ts = f.terms()
        k = rng.randrange(len(ts))
        cut_mono = ts[k].mono
        hi, lo = cut_mono.level_split(1)
        outer = f.truncate(cut_mono)
        inner = f.truncate_at_level(1, hi)
        coeff = f.split_level(1).get(hi, Series.zero(ONE))
        partial = coeff.truncate(lo).shift(hi)
        assert outer.terms() == (inner + partial).terms()
        checked += 1
    assert checked == 40


# -- misc ----------------------------------------------------------------------


def test_coeff_at_and_exactness():
    f = S((1, X), (2, ONE))
    assert f.coeff_at(X) == 1
    assert f.coeff_at(xpow(5)) == 0
    assert f.coeff_at(xpow(-1)) == 0
    assert f.exact_finite
    lazy = S((1, X), (-1, ONE)).inverse()
    assert not lazy.exact_finite


def test_series_text():
    f = S((1, X), (-1, ONE), (Q(1, 2), xpow(-2)))
    assert str(f) == "x - 1 + 1/2*x^-2"

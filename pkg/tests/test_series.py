import random
from fractions import Fraction
from math import comb

import pytest
from hypothesis import given, settings, strategies as st

from ltphigamma.lubin_tate import LubinTateData, random_laurent
from ltphigamma.padic import PadicScalar
from ltphigamma.series import LaurentWindow, WindowError, series_op, substitute, v_annulus, v_box

P, D, N = 3, 2, 12


def mono(n, c=1, prec=N, d=D):
    return LaurentWindow.monomial(P, d, n, prec, c)


def series(vals, n_min=None, n_max=None, exact=False, d=D, prec=N):
    return LaurentWindow.from_fractions(P, d, vals, prec, n_min, n_max, exact)


def test_monomial_product():
    f = series({1: 1}, 0, 10)
    sq = f * f
    assert sq.coeff(2).equals(PadicScalar.from_int(P, D, 1, N))
    assert all(sq.coeff(n).is_zero() for n in range(0, sq.n_max + 1) if n != 2)
    # T + O(T^11) squared is T^2 + O(T^12)
    assert sq.n_max == 11


def test_cancellation():
    f = series({0: 3, 1: 1}, exact=True) + series({1: -1}, exact=True)
    assert f.coeff(0).equals(PadicScalar.from_int(P, D, 3, N))
    assert f.coeff(1).is_zero()


def _schoolbook(f, g, prec):
    out = {}
    for i, a in f.items():
        for j, b in g.items():
            out[i + j] = out.get(i + j, 0) + Fraction(a) * Fraction(b)
    return out


@given(st.integers(0, 2**32))
@settings(max_examples=25, deadline=None)
def test_product_matches_schoolbook(seed):
    rng = random.Random(seed)
    d = 1
    fv = {n: Fraction(rng.randrange(-50, 50), rng.choice([1, 2, 5])) for n in range(-3, 8)}
    gv = {n: Fraction(rng.randrange(-50, 50), rng.choice([1, 4, 7])) for n in range(-2, 9)}
    f = series(fv, -3, 7, True, d)
    g = series(gv, -2, 8, True, d)
    h = f * g
    oracle = _schoolbook(fv, gv, N)
    for n, c in oracle.items():
        assert h.coeff(n).equals(PadicScalar.from_fraction(P, d, c, h.prec), h.prec)


def test_product_window_rule():
    f = series({-2: 1, 0: 1}, -2, 5)
    g = series({-1: 1, 3: 2}, -1, 7)
    h = f * g
    assert h.n_min == -3
    # unknown tails start above top_f + low(g) = 5 - 1 and top_g + low(f) = 7 - 2
    assert h.n_max == 4


def test_window_collapse_on_inverse():
    f = series({0: 1, 1: 1}, 0, 3)
    with pytest.raises(WindowError, match="window-collapse"):
        f.inverse(10)


def test_series_op_names():
    f, g = series({1: 1}, exact=True), series({0: 1}, exact=True)
    assert series_op(f, g, "add").equals(f + g)
    with pytest.raises(ValueError):
        series_op(f, g, "pow")


def test_substitute_identity_and_scaling():
    g = series({1: 1, 2: 5, 4: Fraction(1, 2)}, 0, 6)
    T = series({1: 1}, exact=True)
    assert substitute(g, T).equals(g)
    out = substitute(series({2: 1}, exact=True), series({1: 2}, exact=True))
    assert out.exact and out.coeff(2).equals(PadicScalar.from_int(P, D, 4, N))


def test_cyclotomic_composition_binomial_oracle():
    W = 20
    A = LaurentWindow.from_fractions(P, 1, {k: comb(2, k) for k in (1, 2)}, N, 0, W, False)
    B = LaurentWindow.from_fractions(P, 1, {k: comb(3, k) for k in (1, 2, 3)}, N, 0, W, False)
    out = substitute(A, B)
    for k in range(1, out.n_max + 1):
        assert out.coeff(k).equals(PadicScalar.from_int(P, 1, comb(6, k), N))
    assert out.n_max == W


def test_negative_powers_need_a_dominant_term():
    g = series({-1: 1}, -1, 3)
    with pytest.raises(WindowError, match="bad-substitution-target"):
        substitute(g, series({1: 3, 2: 1}, 0, 6))


def test_v_annulus_examples():
    f = series({0: 3, 1: 1}, exact=True)
    assert v_annulus(f, Fraction(1, 2)).value == Fraction(1, 2)
    assert v_annulus(series({-1: 1}, exact=True), Fraction(1, 3)).value == Fraction(-1, 3)
    for r in (Fraction(1, 5), 1, 7):
        assert v_annulus(series({0: 1}, exact=True), r).value == 0


def grid_inf(f, s, r, points=400):
    vals = [(n, f.coeff_valuation(n)) for n, _ in f.items()]
    return min(min(v + n * (s + (r - s) * Fraction(i, points)) for n, v in vals) for i in range(points + 1))


def test_v_box_examples():
    f = series({0: 3, 1: 1}, exact=True)
    assert v_box(f, Fraction(1, 2), 2).value == Fraction(1, 2) == grid_inf(f, Fraction(1, 2), 2)
    T = series({1: 1}, exact=True)
    assert v_box(T, Fraction(1, 3), 5).value == Fraction(1, 3)
    g = series({-1: 3}, exact=True)
    assert v_box(g, Fraction(1, 2), 2).value == -1 == grid_inf(g, Fraction(1, 2), 2)


def test_inexact_window_gives_lower_bound_floor():
    f = series({0: 1, 1: 1}, 0, 4)
    res = v_annulus(f, 1)
    assert res.value == 0
    assert res.floor <= res.value


def test_inverse_of_unit_series():
    f = series({0: 1, 1: 3, 2: 1}, 0, 15)
    g = f.inverse()
    one = f * g
    assert one.coeff(0).equals(PadicScalar.from_int(P, D, 1, one.prec))
    assert all(one.coeff(n).is_zero() for n in range(1, one.n_max + 1))


def test_inverse_of_p_times_unit():
    f = series({0: 3}, exact=True)
    g = f.inverse(5)
    assert g.coeff(0).equals(PadicScalar.from_fraction(P, D, Fraction(1, 3), g.prec))


def test_json_round_trip():
    lt = LubinTateData(P, D, window=10)
    f = random_laurent(lt, random.Random(4), -3, 10)
    assert LaurentWindow.from_json(f.to_json()).equals(f)


@given(st.integers(0, 2**32))
@settings(max_examples=25, deadline=None)
def test_substitution_is_a_ring_map(seed):
    rng = random.Random(seed)
    lt = LubinTateData(P, D, window=12)
    f = random_laurent(lt, rng, 0, 12, sparse=0.3)
    g = random_laurent(lt, rng, 0, 12, sparse=0.3)
    h = series({1: 3, 2: rng.randrange(1, 9), 3: 1}, exact=True)
    lhs = substitute(f * g, h)
    rhs = substitute(f, h) * substitute(g, h)
    n = min(lhs.n_max, rhs.n_max)
    assert lhs.equals(rhs, min(lhs.prec, rhs.prec), n)

from fractions import Fraction

import pytest
from hypothesis import given, settings, strategies as st

from ltphigamma.padic import (
    AtLeast,
    PadicScalar,
    _Field,
    field_op,
    frobenius,
    padic_exp,
    padic_log,
    teichmuller,
    valuation,
)


def Z(n, prec=2, p=3, d=1):
    return PadicScalar.from_int(p, d, n, prec)


# oracles ---------------------------------------------------------------------
def exp_oracle(a, p, N):
    """sum a^i / i! mod p^N by plain rationals, stopping once terms vanish."""
    total, i = Fraction(0), 0
    while True:
        term = Fraction(a) ** i / _fact(i)
        num = term.numerator
        v = 0
        while num % p == 0 and num:
            num //= p
            v += 1
        den = term.denominator
        while den % p == 0:
            den //= p
            v -= 1
        if i > 2 * N + 10 and v >= N:
            break
        total += term
        i += 1
    return total.numerator * pow(total.denominator, -1, p**N) % p**N


def _fact(n):
    out = 1
    for k in range(2, n + 1):
        out *= k
    return out


def log_oracle(x, p, N, terms=60):
    total = sum(Fraction((-1) ** (i - 1) * (x - 1) ** i, i) for i in range(1, terms))
    return total.numerator * pow(total.denominator, -1, p**N) % p**N


# examples --------------------------------------------------------------------
def test_small_integer_arithmetic():
    assert field_op(Z(2), Z(2), "add").coeffs == (4,)


def test_inverse_of_two_mod_nine():
    # oracle: modular inverse by extended Euclid
    assert (Z(1) / Z(2)).coeffs == (pow(2, -1, 9),) == (5,)


def test_omega_squared_matches_schoolbook_reduction():
    g = _Field.get(3, 2).minpoly(2)  # x^2 + g1 x + g0
    w = PadicScalar.omega(3, 2, 2)
    # schoolbook: w^2 = -g1 w - g0 mod 9
    expected = ((-g[0]) % 9, (-g[1]) % 9)
    assert (w * w).coeffs == expected


def test_omega_is_primitive_eighth_root_of_unity():
    w = PadicScalar.omega(3, 2, 10)
    assert (w**8 - 1).is_zero()
    assert not (w**4 - 1).is_zero()


def test_valuations():
    assert valuation(Z(9, 5)) == 2
    assert valuation(Z(1, 5)) == 0
    # 9w + 9 stored at N = 2 is indistinguishable from zero
    v = valuation(PadicScalar(3, 2, (9, 9), 2))
    assert isinstance(v, AtLeast) and str(v) == "≥ 2"
    # scaling an N = 2 element by 9 keeps two more digits, so this one is exact
    assert valuation(PadicScalar.omega(3, 2, 2) * 9 + 9) == 2


def test_teichmuller_examples():
    assert teichmuller(1, 3, 1, 5).coeffs == (1,)
    # oracle: iterate x -> x^p to the fixed point mod 27
    x = 2
    for _ in range(10):
        x = pow(x, 3, 27)
    assert teichmuller(2, 3, 1, 3).coeffs == (x,) == (26,)
    t = teichmuller((0, 1), 3, 2, 8)
    assert (t**8 - 1).is_zero()


def test_frobenius():
    a = PadicScalar.from_fraction(3, 2, Fraction(5, 7), 10)
    assert frobenius(a).equals(a)
    w = PadicScalar.omega(3, 2, 10)
    assert frobenius(w).equals(w**3)
    b = PadicScalar(3, 2, (4, 11), 10)
    assert frobenius(frobenius(b)).equals(b)


def test_exp_examples():
    assert padic_exp(Z(0, 3)).coeffs == (1,)
    # the truncated series oracle gives 13 (1 + 3 + 18 + 18 mod 27)
    assert exp_oracle(3, 3, 3) == 13
    assert padic_exp(Z(3, 3)).coeffs == (13,)
    assert (padic_exp(Z(3, 6)) * padic_exp(Z(6, 6))).equals(padic_exp(Z(9, 6)))


def test_exp_divergent():
    with pytest.raises(ValueError, match="exp-divergent"):
        padic_exp(Z(1, 3))


def test_log_examples():
    assert padic_log(Z(1, 3)).is_zero()
    assert padic_log(padic_exp(Z(3, 3))).coeffs == (3,)
    assert log_oracle(4, 3, 3) == 21
    assert padic_log(Z(4, 3)).coeffs == (21,)
    with pytest.raises(ValueError, match="log-divergent"):
        padic_log(Z(2, 3))


def test_inexact_zero_divisor():
    with pytest.raises(ZeroDivisionError, match="inexact-zero divisor"):
        Z(1, 3) / Z(27, 3)


def test_division_tracks_loss():
    q = Z(1, 6) / Z(9, 6)
    assert q.valuation() == -2
    # 1/(9 + O(3^6)) = 1/9 + O(3^2): absolute precision N - 2v
    assert q.prec == 6 - 2 * 2


def test_json_round_trip():
    a = PadicScalar(3, 2, (5, 7), 9) * Fraction(1, 3)
    assert PadicScalar.from_json(a.to_json()).equals(a)


# properties ------------------------------------------------------------------
elem = st.tuples(st.integers(0, 3**12 - 1), st.integers(0, 3**12 - 1))


@given(elem, elem, elem)
@settings(max_examples=60, deadline=None)
def test_ring_axioms(a, b, c):
    A, B, C = (PadicScalar(3, 2, x, 12) for x in (a, b, c))
    assert (A * (B + C)).equals(A * B + A * C)
    assert ((A * B) * C).equals(A * (B * C))
    assert (A * B).equals(B * A)


@given(elem, elem)
@settings(max_examples=60, deadline=None)
def test_precision_is_conservative(a, b):
    """Recomputing at N + 2 and truncating reproduces the N answer."""
    A, B = PadicScalar(3, 2, a, 12), PadicScalar(3, 2, b, 12)
    hi_A, hi_B = A.lift(14), B.lift(14)
    if not B.is_zero() and B.valuation() < 6:
        lo = A / B
        hi = (hi_A / hi_B).truncate(lo.prec)
        assert hi.equals(lo)
    assert (hi_A * hi_B).truncate(12).equals(A * B)


@given(st.integers(0, 3**10 - 1), st.integers(0, 3**10 - 1))
@settings(max_examples=40, deadline=None)
def test_exp_log_inverse(x, y):
    a = PadicScalar(3, 2, (x, y), 12) * 3
    assert padic_log(padic_exp(a)).equals(a)
    assert padic_exp(padic_log(padic_exp(a))).equals(padic_exp(a))


@given(st.integers(0, 3**10 - 1), st.integers(0, 3**10 - 1))
@settings(max_examples=40, deadline=None)
def test_frobenius_is_multiplicative(x, y):
    a = PadicScalar(3, 2, (x, y), 10)
    b = PadicScalar(3, 2, (y + 1, x), 10)
    assert frobenius(a * b).equals(frobenius(a) * frobenius(b))

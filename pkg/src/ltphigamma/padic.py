"""Capped-precision arithmetic in unramified extensions of Q_p.

Elements of ``L = Q_{p^d}`` are stored as ``p**shift * sum(c_j * omega**j)``
where ``omega`` is the Teichmuller lift of a fixed primitive generator of
``F_{p^d}``.  The absolute precision ``prec`` says the value is known modulo
``p**prec``.  Integral elements always have ``shift == 0`` so their stored
coefficients are plain residues modulo ``p**prec``.
"""
from __future__ import annotations

import math
from fractions import Fraction
from functools import lru_cache
from itertools import product


class PrecisionError(ArithmeticError):
    """Raised when an operation needs more p-adic digits than are known."""


class AtLeast(int):
    """Valuation of an element that is zero at working precision.

    Behaves as the integer lower bound in comparisons and arithmetic.
    """

    def __repr__(self):
        return f"≥ {int(self)}"

    __str__ = __repr__


def vp_int(n: int, p: int) -> int | float:
    if n == 0:
        return math.inf
    v = 0
    while n % p == 0:
        n //= p
        v += 1
    return v


def vp_fraction(x: Fraction, p: int) -> int | float:
    if x == 0:
        return math.inf
    return vp_int(x.numerator, p) - vp_int(x.denominator, p)


# ---------------------------------------------------------------------------
# Residue field and the Teichmuller modulus


def _poly_mulmod_p(a, b, g, p):
    """Product in F_p[x]/(g), g monic given low-to-high without leading 1."""
    d = len(g)
    res = [0] * (2 * d - 1)
    for i, ai in enumerate(a):
        if ai:
            for j, bj in enumerate(b):
                res[i + j] = (res[i + j] + ai * bj) % p
    for t in range(2 * d - 2, d - 1, -1):
        c = res[t]
        if c:
            res[t] = 0
            for j in range(d):
                res[t - d + j] = (res[t - d + j] - c * g[j]) % p
    return tuple(res[:d])


def _is_primitive(g, p):
    d = len(g)
    order = p**d - 1
    one = (1,) + (0,) * (d - 1)
    x = (0, 1) + (0,) * (d - 2) if d > 1 else (-g[0] % p,)
    cur = one
    seen_one_at = None
    for k in range(1, order + 1):
        cur = _poly_mulmod_p(cur, x, g, p)
        if cur == one:
            seen_one_at = k
            break
    return seen_one_at == order


@lru_cache(maxsize=None)
def residue_modulus(p: int, d: int) -> tuple[int, ...]:
    """Monic primitive polynomial of degree d over F_p (low-to-high, no leading 1).

    The first primitive polynomial in lexicographic order of
    ``(c_{d-1}, ..., c_0)``; for d = 1 this is ``x - g`` for the least
    primitive root g.
    """
    if d == 1:
        for g in range(1, p):
            if _is_primitive(((-g) % p,), p):
                return ((-g) % p,)
    for top in product(range(p), repeat=d):
        g = tuple(reversed(top))
        if g[0] == 0:
            continue
        if _is_primitive(g, p):
            return g
    raise ValueError(f"no primitive polynomial of degree {d} over F_{p}")


class _Field:
    """Arithmetic tables for Z_p[omega] truncated at p**K."""

    _cache: dict = {}

    def __init__(self, p: int, d: int):
        self.p = p
        self.d = d
        self._minpoly_prec = 0
        self._minpoly: tuple[int, ...] = ()
        self._frob_prec = 0
        self._frob: list[tuple[int, ...]] = []

    @classmethod
    def get(cls, p: int, d: int) -> "_Field":
        key = (p, d)
        if key not in cls._cache:
            cls._cache[key] = cls(p, d)
        return cls._cache[key]

    # the minimal polynomial of omega is computed once to a generous
    # precision and extended on demand; truncations are consistent
    def minpoly(self, K: int) -> tuple[int, ...]:
        if K > self._minpoly_prec:
            self._compute_minpoly(max(K, 2 * self._minpoly_prec, 64))
        mod = self.p**K
        return tuple(c % mod for c in self._minpoly)

    def _compute_minpoly(self, K: int):
        p, d = self.p, self.d
        mod = p**K
        if d == 1:
            g = residue_modulus(p, 1)
            root = (-g[0]) % p
            x = root
            for _ in range(K + 1):
                x = pow(x, p, mod)
            self._minpoly = ((-x) % mod,)
            self._minpoly_prec = K
            return
        gbar = residue_modulus(p, d)
        aux = tuple(c % mod for c in gbar)  # Z/p^K[x]/(aux) is Z_q / p^K

        def mul(a, b):
            return _mulmod(a, b, aux, mod)

        def power(a, e):
            r = (1,) + (0,) * (d - 1)
            while e:
                if e & 1:
                    r = mul(r, a)
                a = mul(a, a)
                e >>= 1
            return r

        q = p**d
        w = (0, 1) + (0,) * (d - 2)
        for _ in range(K + 1):
            w = power(w, q)
        conj = [w]
        for _ in range(d - 1):
            conj.append(power(conj[-1], p))
        # prod (X - conj_i) with coefficients in Z_p (constant polynomials)
        poly = [(1,) + (0,) * (d - 1)]
        for c in conj:
            neg = tuple((-x) % mod for x in c)
            new = [(0,) * d for _ in range(len(poly) + 1)]
            for i, coef in enumerate(poly):
                new[i + 1] = _add(new[i + 1], coef, mod)
                new[i] = _add(new[i], mul(coef, neg), mod)
            poly = new
        low = poly[:-1]
        for coef in low:
            if any(coef[1:]):
                raise AssertionError("minimal polynomial not over Z_p")
        self._minpoly = tuple(coef[0] for coef in low)
        self._minpoly_prec = K

    def frob_images(self, K: int) -> list[tuple[int, ...]]:
        """omega**(p*j) for j < d, reduced modulo p**K."""
        if K > self._frob_prec:
            KK = max(K, 2 * self._frob_prec, 64)
            mod = self.p**KK
            g = self.minpoly(KK)
            wp = _pow_elem((0, 1) + (0,) * (self.d - 2), self.p, g, mod)
            imgs = [(1,) + (0,) * (self.d - 1)]
            for _ in range(self.d - 1):
                imgs.append(_mulmod(imgs[-1], wp, g, mod))
            self._frob = imgs
            self._frob_prec = KK
        mod = self.p**K
        return [tuple(x % mod for x in v) for v in self._frob]


def _add(a, b, mod):
    return tuple((x + y) % mod for x, y in zip(a, b))


def _mulmod(a, b, g, mod):
    """Product in (Z/mod)[omega]/(g)."""
    d = len(g)
    if d == 1:
        # omega = -g[0]; elements are scalars in that basis
        return ((a[0] * b[0]) % mod,)
    res = [0] * (2 * d - 1)
    for i, ai in enumerate(a):
        if ai:
            for j, bj in enumerate(b):
                res[i + j] += ai * bj
    for t in range(2 * d - 2, d - 1, -1):
        c = res[t] % mod
        if c:
            for j in range(d):
                res[t - d + j] -= c * g[j]
    return tuple(x % mod for x in res[:d])


def _pow_elem(a, e, g, mod):
    r = (1,) + (0,) * (len(g) - 1)
    while e:
        if e & 1:
            r = _mulmod(r, a, g, mod)
        a = _mulmod(a, a, g, mod)
        e >>= 1
    return r


def _inverse_unit(a, p, d, K):
    """Inverse of a unit of Z_p[omega] modulo p**K."""
    if d == 1:
        return (pow(a[0], -1, p**K),)
    F = _Field.get(p, d)
    gp = F.minpoly(1)
    x = _pow_elem(tuple(c % p for c in a), p**d - 2, gp, p)
    k = 1
    while k < K:
        k = min(2 * k, K)
        mod = p**k
        g = F.minpoly(k)
        ax = _mulmod(a, x, g, mod)
        two_minus = tuple(((2 if i == 0 else 0) - c) % mod for i, c in enumerate(ax))
        x = _mulmod(x, two_minus, g, mod)
    return x


# ---------------------------------------------------------------------------


class PadicScalar:
    """Element of Q_{p^d} known modulo ``p**prec``."""

    __slots__ = ("p", "deg", "prec", "shift", "coeffs")

    def __init__(self, p: int, deg: int, coeffs, prec: int, shift: int = 0):
        if p == 2 or p < 2:
            raise ValueError("p must be an odd prime")
        self.p = p
        self.deg = deg
        self.prec = prec
        coeffs = tuple(int(c) for c in coeffs)
        if len(coeffs) < deg:
            coeffs = coeffs + (0,) * (deg - len(coeffs))
        elif len(coeffs) > deg:
            raise ValueError("too many coefficients for the field degree")
        if shift > prec:
            shift = prec
            coeffs = (0,) * deg
        mod = p ** (prec - shift)
        coeffs = tuple(c % mod for c in coeffs)
        # normalise: shift == 0 for integral values, else shift == valuation
        if shift < 0:
            m = min((vp_int(c, p) for c in coeffs), default=math.inf)
            if m == math.inf:
                coeffs, shift = (0,) * deg, 0
                coeffs = tuple(0 for _ in coeffs)
            elif m > 0:
                up = min(m, -shift)
                coeffs = tuple(c // p**up for c in coeffs)
                shift += up
        elif shift > 0:
            coeffs = tuple((c * p**shift) % p**prec for c in coeffs)
            shift = 0
        self.shift = shift
        self.coeffs = coeffs

    # -- constructors ------------------------------------------------------
    @classmethod
    def from_int(cls, p, deg, n, prec):
        return cls(p, deg, (n,) + (0,) * (deg - 1), prec)

    @classmethod
    def from_fraction(cls, p, deg, x: Fraction, prec):
        x = Fraction(x)
        if x == 0:
            return cls(p, deg, (0,) * deg, prec)
        v = vp_fraction(x, p)
        num, den = x.numerator, x.denominator
        den_unit = den // p ** vp_int(den, p)
        if v < 0:
            shift = v
            K = prec - shift
            c = (num * pow(den_unit, -1, p**K)) % p**K
            return cls(p, deg, (c,) + (0,) * (deg - 1), prec, shift)
        c = (num * pow(den_unit, -1, p**prec)) % p**prec
        return cls(p, deg, (c,) + (0,) * (deg - 1), prec)

    @classmethod
    def omega(cls, p, deg, prec):
        if deg == 1:
            g = _Field.get(p, 1).minpoly(prec)
            return cls(p, 1, ((-g[0]),), prec)
        return cls(p, deg, (0, 1) + (0,) * (deg - 2), prec)

    def _like(self, coeffs, prec, shift=0):
        return PadicScalar(self.p, self.deg, coeffs, prec, shift)

    def _coerce(self, other):
        if isinstance(other, PadicScalar):
            if other.p != self.p or other.deg != self.deg:
                raise ValueError("incompatible p-adic parameters")
            return other
        if isinstance(other, Fraction):
            v = vp_fraction(other, self.p)
            v = 0 if v == math.inf else v
            return PadicScalar.from_fraction(self.p, self.deg, other, self._exact_prec(v))
        if isinstance(other, int):
            v = vp_int(other, self.p)
            v = 0 if v == math.inf else v
            return PadicScalar.from_int(self.p, self.deg, other, self._exact_prec(v))
        return NotImplemented

    def _exact_prec(self, v):
        # precision large enough that an exact operand never limits a result
        return 2 * abs(self.prec) + 2 * abs(self.shift) + abs(v) + 4

    # -- basic queries -----------------------------------------------------
    def is_zero(self) -> bool:
        """True when the value vanishes at working precision."""
        return not any(self.coeffs)

    def valuation(self):
        if self.is_zero():
            return AtLeast(self.prec)
        return self.shift + min(vp_int(c, self.p) for c in self.coeffs)

    def unit_part(self):
        """Return (v, u) with self = p**v * u and u a unit (relative precision)."""
        v = self.valuation()
        if isinstance(v, AtLeast):
            raise ZeroDivisionError("inexact-zero divisor")
        k = v - self.shift
        u = tuple(c // self.p**k for c in self.coeffs)
        return v, u, self.prec - v

    def lift(self, prec: int) -> "PadicScalar":
        """Same stored digits, declared known to ``prec`` (representative lift)."""
        return PadicScalar(self.p, self.deg, self.coeffs, prec, self.shift)

    def truncate(self, prec: int) -> "PadicScalar":
        return PadicScalar(self.p, self.deg, self.coeffs, min(prec, self.prec), self.shift)

    def residue(self):
        if self.shift < 0:
            raise ValueError("not integral")
        return tuple(c % self.p for c in self.coeffs)

    def rational_coeffs(self):
        """Coefficients in the omega-basis as Fractions (a representative)."""
        return [Fraction(c) * Fraction(self.p) ** self.shift for c in self.coeffs]

    # -- arithmetic --------------------------------------------------------
    def __add__(self, other):
        other = self._coerce(other)
        if other is NotImplemented:
            return other
        p = self.p
        prec = min(self.prec, other.prec)
        shift = min(self.shift, other.shift)
        a = [c * p ** (self.shift - shift) for c in self.coeffs]
        b = [c * p ** (other.shift - shift) for c in other.coeffs]
        return self._like([x + y for x, y in zip(a, b)], prec, shift)

    __radd__ = __add__

    def __neg__(self):
        return self._like([-c for c in self.coeffs], self.prec, self.shift)

    def __sub__(self, other):
        other = self._coerce(other)
        if other is NotImplemented:
            return other
        return self + (-other)

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, other):
        other = self._coerce(other)
        if other is NotImplemented:
            return other
        va, vb = self.valuation(), other.valuation()
        prec = min(self.prec + vb, other.prec + va)
        shift = self.shift + other.shift
        if prec <= shift:
            return self._like((0,) * self.deg, prec)
        K = prec - shift
        g = _Field.get(self.p, self.deg).minpoly(K) if self.deg > 1 else (0,)
        c = _mulmod(self.coeffs, other.coeffs, g, self.p**K)
        return self._like(c, prec, shift)

    __rmul__ = __mul__

    def inverse(self):
        v, u, rel = self.unit_part()
        inv = _inverse_unit(u, self.p, self.deg, rel)
        return self._like(inv, rel - v, -v)

    def __truediv__(self, other):
        other = self._coerce(other)
        if other is NotImplemented:
            return other
        return self * other.inverse()

    def __rtruediv__(self, other):
        return self.inverse() * other

    def __pow__(self, e: int):
        if e < 0:
            return self.inverse() ** (-e)
        result = self._coerce(1)
        base = self
        while e:
            if e & 1:
                result = result * base
            base = base * base
            e >>= 1
        return result

    def equals(self, other, prec: int | None = None) -> bool:
        """Equality modulo p**prec (default: the joint working precision)."""
        diff = self - other
        bound = diff.prec if prec is None else min(prec, diff.prec)
        if prec is not None and prec > diff.prec:
            return False
        return diff.is_zero() or diff.valuation() >= bound

    def __eq__(self, other):
        try:
            return self.equals(other)
        except (TypeError, ValueError):
            return NotImplemented

    def __hash__(self):
        return hash((self.p, self.deg, self.shift, self.coeffs))

    def __repr__(self):
        body = " + ".join(
            f"{c}*w^{j}" if j else str(c) for j, c in enumerate(self.coeffs) if c
        ) or "0"
        sh = f"p^{self.shift}*({body})" if self.shift else body
        return f"{sh} + O({self.p}^{self.prec})"

    # -- serialization -----------------------------------------------------
    def to_json(self) -> dict:
        out = {"p": self.p, "deg": self.deg, "prec": self.prec, "coeffs": list(self.coeffs)}
        if self.shift:
            out["shift"] = self.shift
        return out

    @classmethod
    def from_json(cls, data: dict) -> "PadicScalar":
        return cls(data["p"], data["deg"], data["coeffs"], data["prec"], data.get("shift", 0))


# ---------------------------------------------------------------------------
# module-level operations


def field_op(a: PadicScalar, b: PadicScalar, op: str) -> PadicScalar:
    if op == "add":
        return a + b
    if op == "sub":
        return a - b
    if op == "mul":
        return a * b
    if op == "div":
        return a / b
    raise ValueError(f"unknown field operation {op!r}")


def valuation(a: PadicScalar):
    return a.valuation()


def teichmuller(residue, p: int, deg: int, prec: int) -> PadicScalar:
    """Unique (q-1)-th root of unity reducing to ``residue``.

    ``residue`` is an int (deg 1) or a tuple of residues in the omega-basis.
    """
    if isinstance(residue, int):
        residue = (residue,) + (0,) * (deg - 1)
    residue = tuple(r % p for r in residue)
    if not any(residue):
        raise ValueError("Teichmuller lift of zero residue")
    x = PadicScalar(p, deg, residue, prec)
    q = p**deg
    for _ in range(prec + 1):
        x = x**q
    return x


def frobenius(a: PadicScalar) -> PadicScalar:
    """Arithmetic Frobenius: omega -> omega**p, fixing Q_p."""
    if a.deg == 1:
        return a
    K = a.prec - a.shift
    imgs = _Field.get(a.p, a.deg).frob_images(K)
    mod = a.p**K
    out = [0] * a.deg
    for c, img in zip(a.coeffs, imgs):
        if c:
            for j in range(a.deg):
                out[j] += c * img[j]
    return PadicScalar(a.p, a.deg, [x % mod for x in out], a.prec, a.shift)


def _exp_threshold_ok(a: PadicScalar) -> bool:
    v = a.valuation()
    return isinstance(v, AtLeast) or Fraction(v) > Fraction(1, a.p - 1)


def padic_exp(a: PadicScalar) -> PadicScalar:
    if not _exp_threshold_ok(a):
        raise ValueError("exp-divergent")
    p = a.p
    one = a._coerce(1).truncate(a.prec)
    if a.is_zero():
        return one
    v = a.valuation()
    total = one
    power = one
    fact = 1
    i = 0
    while True:
        i += 1
        # v_p(i!) <= (i-1)/(p-1), so this bound increases with i
        if i * v - Fraction(i - 1, p - 1) >= a.prec:
            break
        power = power * a
        fact *= i
        total = total + power / fact
    return total.truncate(a.prec)


def padic_log(a: PadicScalar) -> PadicScalar:
    x = a - 1
    v = x.valuation()
    if not isinstance(v, AtLeast) and v <= 0:
        raise ValueError("log-divergent")
    if x.is_zero():
        return x
    p = a.p
    total = x._coerce(0).truncate(a.prec)
    power = x._coerce(1)
    i = 0
    while True:
        i += 1
        power = power * x
        term = power / i
        if i % 2 == 0:
            term = -term
        total = total + term
        # every later term has valuation >= j*v - log_p(j)
        j = i + 1
        if j * v - math.floor(math.log(j, p)) >= a.prec:
            break
    return total.truncate(a.prec)

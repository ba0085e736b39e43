"""Truncated Laurent series over Q_{p^d} with annulus valuations.

A :class:`LaurentWindow` stores coefficients for exponents ``n_min..n_max``.
Coefficients below ``n_min`` are exactly zero.  Coefficients above ``n_max``
are unknown unless the series is flagged ``exact`` (a Laurent polynomial).
All coefficients share one absolute p-adic precision and one power-of-p
shift, which keeps products fast: multiplication packs coefficient vectors
into big integers (Kronecker substitution).
"""
from __future__ import annotations

import math
from fractions import Fraction
from typing import NamedTuple

from .padic import AtLeast, PadicScalar, _Field, vp_fraction, vp_int


class WindowError(ValueError):
    pass


class AnnulusValuation(NamedTuple):
    value: Fraction | float
    lower_bound_only: bool
    floor: Fraction | float


def _pack(vals, nbytes):
    return int.from_bytes(b"".join(v.to_bytes(nbytes, "little") for v in vals), "little")


def _unpack(big, n, nbytes):
    raw = big.to_bytes(n * nbytes, "little")
    return [int.from_bytes(raw[i * nbytes:(i + 1) * nbytes], "little") for i in range(n)]


def _reduction_table(p, d, K):
    """omega**t in the basis 1..omega**(d-1), for d <= t <= 2d-2, modulo p**K."""
    if d == 1:
        return {}
    g = _Field.get(p, d).minpoly(K)
    mod = p**K
    table = {}
    cur = tuple((-c) % mod for c in g)  # omega**d
    table[d] = cur
    for t in range(d + 1, 2 * d - 1):
        top = cur[-1]
        shifted = (0,) + cur[:-1]
        cur = tuple((s - top * gj) % mod for s, gj in zip(shifted, g))
        table[t] = cur
    return table


def _combine(sums, p, d, K, length):
    """Reduce sum_t S_t * omega**t to the omega-basis, coefficientwise mod p**K."""
    mod = p**K
    if d == 1:
        return [((c % mod),) for c in sums[0][:length]]
    red = _reduction_table(p, d, K)
    out = []
    for n in range(length):
        vec = [sums[t][n] for t in range(d)]
        for t in range(d, 2 * d - 1):
            s = sums[t][n]
            if s:
                r = red[t]
                for j in range(d):
                    vec[j] += s * r[j]
        out.append(tuple(x % mod for x in vec))
    return out


def _convolve(A, B, p, d, K, length):
    """Truncated product of two coefficient lists (ring elements mod p**K)."""
    if not A or not B or length <= 0:
        return [(0,) * d for _ in range(max(length, 0))]
    mod = p**K
    la, lb = min(len(A), length), min(len(B), length)
    A, B = A[:la], B[:lb]
    bound = min(la, lb) * d * (mod - 1) ** 2 + 1
    nbytes = (bound.bit_length() + 8) // 8
    pa = [_pack([a[j] % mod for a in A], nbytes) for j in range(d)]
    pb = [_pack([b[j] % mod for b in B], nbytes) for j in range(d)]
    sums_big = [0] * (2 * d - 1)
    for j in range(d):
        if pa[j]:
            for k in range(d):
                if pb[k]:
                    sums_big[j + k] += pa[j] * pb[k]
    n = la + lb - 1
    # each slot sums at most d products, which the slot width allows for
    sums = []
    for s in sums_big:
        vals = _unpack(s, n + d, nbytes)[:n] if s else [0] * n
        vals += [0] * max(0, length - n)
        sums.append(vals)
    return _combine(sums, p, d, K, length)


class LaurentWindow:
    """Windowed Laurent series ``sum a_n T^n`` with shared p-adic precision."""

    __slots__ = ("p", "deg", "prec", "shift", "n_min", "n_max", "exact", "coeffs")

    def __init__(self, p, deg, coeffs, n_min, prec, shift=0, n_max=None, exact=False):
        self.p = p
        self.deg = deg
        self.prec = prec
        self.n_min = n_min
        coeffs = [tuple(c) for c in coeffs]
        if n_max is None:
            n_max = n_min + len(coeffs) - 1
        if n_max < n_min:
            raise WindowError("window-collapse")
        length = n_max - n_min + 1
        coeffs = coeffs[:length] + [(0,) * deg] * (length - len(coeffs))
        if shift > prec:
            shift = prec
        K = prec - shift
        mod = p**K if K > 0 else 1
        coeffs = [tuple(x % mod for x in c) for c in coeffs]
        if shift < 0:
            m = math.inf
            for c in coeffs:
                for x in c:
                    if x:
                        m = min(m, vp_int(x, p))
                        if m == 0:
                            break
                if m == 0:
                    break
            if m == math.inf:
                shift = 0
                coeffs = [(0,) * deg for _ in coeffs]
            elif m > 0:
                up = min(m, -shift)
                div = p**up
                coeffs = [tuple(x // div for x in c) for c in coeffs]
                shift += up
        elif shift > 0:
            mul = p**shift
            mod = p**prec
            coeffs = [tuple((x * mul) % mod for x in c) for c in coeffs]
            shift = 0
        self.shift = shift
        self.n_max = n_max
        self.exact = exact
        self.coeffs = tuple(coeffs)

    # -- constructors ------------------------------------------------------
    @classmethod
    def from_scalars(cls, scalars: dict, n_min=None, n_max=None, prec=None, exact=False, p=None, deg=None):
        """Build from ``{n: PadicScalar}``; missing entries inside the window are zero."""
        items = {n: s for n, s in scalars.items()}
        if p is None:
            first = next(iter(items.values()))
            p, deg = first.p, first.deg
        if n_min is None:
            n_min = min(items) if items else 0
        if n_max is None:
            n_max = max(items) if items else n_min
        if prec is None:
            prec = min(s.prec for s in items.values())
        shift = min([0] + [s.shift for s in items.values()])
        coeffs = []
        for n in range(n_min, n_max + 1):
            s = items.get(n)
            if s is None:
                coeffs.append((0,) * deg)
                continue
            if s.prec < prec:
                prec = s.prec
            f = p ** (s.shift - shift)
            coeffs.append(tuple(c * f for c in s.coeffs))
        return cls(p, deg, coeffs, n_min, prec, shift, n_max, exact)

    @classmethod
    def from_fractions(cls, p, deg, values: dict, prec, n_min=None, n_max=None, exact=False):
        """Coefficients given as rationals in Q (placed on omega**0)."""
        scal = {n: PadicScalar.from_fraction(p, deg, Fraction(v), prec) for n, v in values.items() if v}
        if n_min is None:
            n_min = min(values) if values else 0
        if n_max is None:
            n_max = max(values) if values else n_min
        if not scal:
            return cls.zero(p, deg, prec, n_min, n_max, exact)
        return cls.from_scalars(scal, n_min, n_max, prec, exact, p, deg)

    @classmethod
    def zero(cls, p, deg, prec, n_min=0, n_max=0, exact=True):
        return cls(p, deg, [], n_min, prec, 0, n_max, exact)

    @classmethod
    def monomial(cls, p, deg, n, prec, coeff=1):
        c = (coeff,) + (0,) * (deg - 1)
        return cls(p, deg, [c], n, prec, 0, n, True)

    @classmethod
    def constant(cls, scalar: PadicScalar):
        return cls.from_scalars({0: scalar}, 0, 0, scalar.prec, True)

    def _like(self, coeffs, n_min, prec, shift, n_max, exact):
        return LaurentWindow(self.p, self.deg, coeffs, n_min, prec, shift, n_max, exact)

    # -- queries -----------------------------------------------------------
    @property
    def top(self):
        """Largest exponent through which the series is known (inf if exact)."""
        return math.inf if self.exact else self.n_max

    def coeff(self, n: int) -> PadicScalar:
        if n < self.n_min or (n > self.n_max and self.exact):
            return PadicScalar(self.p, self.deg, (0,) * self.deg, self.prec)
        if n > self.n_max:
            raise WindowError(f"coefficient {n} outside the known window")
        c = self.coeffs[n - self.n_min]
        return PadicScalar(self.p, self.deg, c, self.prec, self.shift)

    def items(self):
        for i, c in enumerate(self.coeffs):
            if any(c):
                yield self.n_min + i, PadicScalar(self.p, self.deg, c, self.prec, self.shift)

    def coeff_valuation(self, n):
        c = self.coeffs[n - self.n_min]
        if not any(c):
            return AtLeast(self.prec)
        return self.shift + min(vp_int(x, self.p) for x in c if x)

    def valuation_floor(self):
        """min_n v_p(a_n) over the stored window (prec if everything vanishes)."""
        best = None
        for c in self.coeffs:
            for x in c:
                if x:
                    v = vp_int(x, self.p)
                    best = v if best is None else min(best, v)
                    if best == 0:
                        return self.shift
        return self.prec if best is None else self.shift + best

    def is_zero(self) -> bool:
        return not any(any(c) for c in self.coeffs)

    def t_valuation(self):
        for i, c in enumerate(self.coeffs):
            if any(c):
                return self.n_min + i
        return math.inf

    def _low(self):
        """Lowest degree that can carry a nonzero coefficient."""
        v = self.t_valuation()
        if v == math.inf and not self.exact:
            return self.n_max + 1
        return v

    def _aligned(self, shift, K):
        """Coefficients rescaled to a (lower) shift, reduced modulo p**K."""
        f = self.p ** (self.shift - shift)
        mod = self.p**K
        return [tuple((x * f) % mod for x in c) for c in self.coeffs]

    # -- precision/window management ---------------------------------------
    def lift(self, prec):
        return self._like(self.coeffs, self.n_min, prec, self.shift, self.n_max, self.exact)

    def truncate(self, prec=None, n_max=None):
        prec = self.prec if prec is None else min(prec, self.prec)
        exact = self.exact
        if n_max is None or n_max >= self.n_max:
            n_max2 = self.n_max
        else:
            n_max2 = n_max
            exact = False
        coeffs = self.coeffs[: n_max2 - self.n_min + 1]
        return self._like(coeffs, self.n_min, prec, self.shift, n_max2, exact)

    def restrict(self, n_max):
        """Forget coefficients above n_max (makes the series inexact)."""
        if self.exact and n_max >= self.n_max:
            return self._like(self.coeffs, self.n_min, self.prec, self.shift, n_max, False)
        return self.truncate(n_max=n_max)

    def extend(self, n_max):
        """Widen an exact series so that ``n_max`` covers at least ``n_max``."""
        if not self.exact:
            raise WindowError("only exact series can be widened")
        if n_max <= self.n_max:
            return self
        return self._like(self.coeffs, self.n_min, self.prec, self.shift, n_max, True)

    # -- arithmetic --------------------------------------------------------
    def _check(self, other):
        if other.p != self.p or other.deg != self.deg:
            raise ValueError("incompatible scalar parameters")

    def _coerce(self, other):
        if isinstance(other, LaurentWindow):
            self._check(other)
            return other
        if isinstance(other, (int, Fraction)):
            v = vp_fraction(Fraction(other), self.p)
            v = 0 if v == math.inf else v
            s = PadicScalar.from_fraction(self.p, self.deg, Fraction(other), 2 * abs(self.prec) + 2 * abs(self.shift) + abs(v) + 4)
            return LaurentWindow.constant(s)
        if isinstance(other, PadicScalar):
            return LaurentWindow.constant(other)
        return NotImplemented

    def __add__(self, other):
        other = self._coerce(other)
        if other is NotImplemented:
            return other
        n_min = min(self.n_min, other.n_min)
        top = min(self.top, other.top)
        exact = top == math.inf
        n_max = max(self.n_max, other.n_max) if exact else top
        if n_max < n_min:
            raise WindowError("window-collapse")
        prec = min(self.prec, other.prec)
        shift = min(self.shift, other.shift)
        K = prec - shift
        if K <= 0:
            return LaurentWindow.zero(self.p, self.deg, prec, n_min, n_max, exact)
        mod = self.p**K
        out = [[0] * self.deg for _ in range(n_max - n_min + 1)]
        for src in (self, other):
            for i, c in enumerate(src._aligned(shift, K)):
                n = src.n_min + i
                if n > n_max:
                    break
                row = out[n - n_min]
                for j in range(self.deg):
                    row[j] += c[j]
        return self._like([tuple(x % mod for x in r) for r in out], n_min, prec, shift, n_max, exact)

    __radd__ = __add__

    def __neg__(self):
        return self._like([tuple(-x for x in c) for c in self.coeffs], self.n_min, self.prec, self.shift, self.n_max, self.exact)

    def __sub__(self, other):
        other = self._coerce(other)
        if other is NotImplemented:
            return other
        return self + (-other)

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, other):
        if isinstance(other, PadicScalar) or isinstance(other, (int, Fraction)):
            return self.scale(other)
        other = self._coerce(other)
        if other is NotImplemented:
            return other
        n_min = self.n_min + other.n_min
        # the unknown tail of one factor meets the other from its lowest nonzero term on
        top = min(self.top + other._low(), other.top + self._low())
        exact = top == math.inf
        n_max = self.n_max + other.n_max if exact else top
        if n_max < n_min:
            raise WindowError("window-collapse")
        va, vb = self.valuation_floor(), other.valuation_floor()
        prec = min(self.prec + vb, other.prec + va)
        shift = self.shift + other.shift
        length = n_max - n_min + 1
        K = prec - shift
        if K <= 0:
            return LaurentWindow.zero(self.p, self.deg, prec, n_min, n_max, exact)
        coeffs = _convolve(list(self.coeffs), list(other.coeffs), self.p, self.deg, K, length)
        return self._like(coeffs, n_min, prec, shift, n_max, exact)

    __rmul__ = __mul__

    def scale(self, c) -> "LaurentWindow":
        if not isinstance(c, PadicScalar):
            c = self.coeff(self.n_min)._coerce(c)
        if c.is_zero():
            prec = min(self.prec + c.valuation(), c.prec + self.valuation_floor())
            return LaurentWindow.zero(self.p, self.deg, prec, self.n_min, self.n_max, self.exact)
        prec = min(self.prec + c.valuation(), c.prec + self.valuation_floor())
        shift = self.shift + c.shift
        K = prec - shift
        if K <= 0:
            return LaurentWindow.zero(self.p, self.deg, prec, self.n_min, self.n_max, self.exact)
        coeffs = _convolve([c.coeffs], list(self.coeffs), self.p, self.deg, K, len(self.coeffs))
        return self._like(coeffs, self.n_min, prec, shift, self.n_max, self.exact)

    def __truediv__(self, c):
        if isinstance(c, LaurentWindow):
            return self * c.inverse()
        if not isinstance(c, PadicScalar):
            c = self.coeff(self.n_min)._coerce(c)
        return self.scale(c.inverse())

    def shift_t(self, k: int) -> "LaurentWindow":
        """Multiply by T**k."""
        return self._like(self.coeffs, self.n_min + k, self.prec, self.shift, self.n_max + k, self.exact)

    def inverse(self, n_max=None) -> "LaurentWindow":
        """Inverse of a series whose lowest stored coefficient is a unit."""
        v = self.t_valuation()
        if v == math.inf:
            raise ZeroDivisionError("inexact-zero divisor")
        lead = self.coeff(v)
        lv, _, _ = lead.unit_part()
        if lv != self.valuation_floor():
            raise WindowError("inverse needs a dominant leading coefficient")
        if lv != 0:
            c = PadicScalar.from_fraction(self.p, self.deg, Fraction(1, self.p) ** lv, self.prec + 2 * abs(lv) + 4)
            return self.scale(c).inverse(n_max).scale(c)
        width = self.top - v  # relative T-precision of the unit part
        if n_max is None:
            if width == math.inf:
                raise WindowError("give n_max to invert an exact series")
            n_max = -v + width
        length = n_max + v + 1
        if length <= 0:
            raise WindowError("window-collapse")
        if length - 1 > width:
            raise WindowError("window-collapse")
        p, d, K = self.p, self.deg, self.prec
        mod = p**K
        g = _Field.get(p, d).minpoly(K) if d > 1 else (0,)
        from .padic import _inverse_unit, _mulmod
        U = [self.coeffs[v - self.n_min + i] if v + i <= self.n_max else (0,) * d for i in range(length)]
        inv0 = _inverse_unit(U[0], p, d, K)
        neg_inv0 = tuple((-x) % mod for x in inv0)
        V = [inv0]
        for n in range(1, length):
            acc = [0] * d
            for j in range(1, n + 1):
                if any(U[j]):
                    prod_ = _mulmod(U[j], V[n - j], g, mod)
                    for t in range(d):
                        acc[t] += prod_[t]
            V.append(_mulmod(tuple(a % mod for a in acc), neg_inv0, g, mod))
        return self._like(V, -v, self.prec, 0, n_max, False)

    def __pow__(self, e: int):
        if e < 0:
            raise ValueError("use inverse() for negative powers")
        result = LaurentWindow.monomial(self.p, self.deg, 0, self.prec)
        base = self
        while e:
            if e & 1:
                result = result * base
            e >>= 1
            if e:
                base = base * base
        return result

    def derivative(self) -> "LaurentWindow":
        vals = {}
        for n, s in self.items():
            if n != 0:
                vals[n - 1] = s * n
        if not vals:
            return LaurentWindow.zero(self.p, self.deg, self.prec, self.n_min - 1, self.n_max - 1, self.exact)
        return LaurentWindow.from_scalars(vals, self.n_min - 1, self.n_max - 1, None, self.exact, self.p, self.deg)

    # -- comparison --------------------------------------------------------
    def equals(self, other, prec=None, n_max=None) -> bool:
        """Coefficientwise equality modulo p**prec on the common known window."""
        other = self._coerce(other)
        diff = self - other
        bound = diff.prec if prec is None else prec
        if bound > diff.prec:
            return False
        hi = diff.n_max if n_max is None else min(n_max, diff.n_max)
        for n in range(diff.n_min, hi + 1):
            if diff.coeff_valuation(n) < bound:
                return False
        return True

    def deficit(self, other) -> int | float:
        """min_n v_p(self_n - other_n) over the common window (inf if all zero)."""
        diff = self - other
        best = math.inf
        for n in range(diff.n_min, diff.n_max + 1):
            v = diff.coeff_valuation(n)
            if not isinstance(v, AtLeast):
                best = min(best, v)
        return best

    def __repr__(self):
        terms = []
        for n, s in self.items():
            terms.append(f"({s.rational_repr()})*T^{n}" if hasattr(s, "rational_repr") else f"[{s!r}]T^{n}")
        tail = "" if self.exact else f" + O(T^{self.n_max + 1})"
        return " + ".join(terms[:8]) + (" + ..." if len(terms) > 8 else "") + tail

    # -- serialization -----------------------------------------------------
    def to_json(self) -> dict:
        out = {
            "n_min": self.n_min,
            "n_max": self.n_max,
            "coeffs": {str(n): s.to_json() for n, s in self.items()},
        }
        out["p"] = self.p
        out["deg"] = self.deg
        out["prec"] = self.prec
        if self.exact:
            out["exact"] = True
        return out

    @classmethod
    def from_json(cls, data: dict) -> "LaurentWindow":
        scal = {int(n): PadicScalar.from_json(v) for n, v in data["coeffs"].items()}
        p = data.get("p")
        deg = data.get("deg")
        if p is None:
            first = next(iter(scal.values()))
            p, deg = first.p, first.deg
        prec = data.get("prec")
        if prec is None:
            prec = min(s.prec for s in scal.values())
        if not scal:
            return cls.zero(p, deg, prec, data["n_min"], data["n_max"], data.get("exact", False))
        return cls.from_scalars(scal, data["n_min"], data["n_max"], prec, data.get("exact", False), p, deg)


# ---------------------------------------------------------------------------
# operations


def series_op(f: LaurentWindow, g: LaurentWindow, op: str) -> LaurentWindow:
    if op == "add":
        return f + g
    if op == "sub":
        return f - g
    if op == "mul":
        return f * g
    raise ValueError(f"unknown series operation {op!r}")


class PowerTable:
    """Powers h**k of a substitution target for k in [k_min, k_max].

    Each power is stored packed (Kronecker) so that a substitution
    ``sum_k g_k h**k`` costs one big-int product per coefficient.
    """

    def __init__(self, h: LaurentWindow, k_min: int, k_max: int, n_max: int, prec: int):
        v = h.t_valuation()
        if v == math.inf or v < 1 or h.n_min < 1 and v < 1:
            raise WindowError("bad-substitution-target")
        if h.shift < 0:
            raise WindowError("bad-substitution-target")
        self.h = h
        self.v = v
        self.k_min = k_min
        self.k_max = k_max
        self.n_max = n_max
        self.prec = min(prec, h.prec)
        self.p, self.deg = h.p, h.deg
        hh = h.truncate(self.prec)
        if not hh.exact:
            hh = hh.truncate(n_max=min(hh.n_max, n_max - (k_min - 1) * v if k_min < 0 else hh.n_max))
        self.powers: dict[int, LaurentWindow] = {}
        one = LaurentWindow.monomial(self.p, self.deg, 0, self.prec)

        def cap(s):
            return s.restrict(n_max) if s.n_max > n_max else s

        if k_max >= 0 or k_min <= 0:
            self.powers[0] = one
        cur = one
        hr = cap(hh) if k_max >= 1 else None
        for k in range(1, k_max + 1):
            cur = cap(cur * hr)
            self.powers[k] = cur
        if k_min < 0:
            if v != 1:
                raise WindowError("bad-substitution-target")
            lead = hh.coeff(1)
            if lead.is_zero() or lead.valuation() != 0:
                raise WindowError("bad-substitution-target")
            inv = hh.inverse(n_max=n_max - (k_min + 1) if hh.exact else None)
            cur = one
            invr = inv
            for k in range(-1, k_min - 1, -1):
                cur = cur * invr
                self.powers[k] = cap(cur)

    def apply(self, g: LaurentWindow, n_max: int | None = None) -> LaurentWindow:
        """sum_k g_k h**k on the provably known window."""
        p, d = self.p, self.deg
        if g.n_min < self.k_min or g.n_max > self.k_max:
            raise WindowError("power table does not cover the series window")
        hi = math.inf
        if not g.exact:
            hi = self.v * (g.n_max + 1) - 1
        used = [g.n_min + i for i, c in enumerate(g.coeffs) if any(c)] or [g.n_min]
        for k in used:
            hi = min(hi, self.powers[k].top)
        if n_max is not None:
            hi = min(hi, n_max)
        exact = hi == math.inf
        if exact:
            hi = max(self.powers[k].n_max for k in used)
        lo = self.v * g.n_min
        if hi < lo:
            raise WindowError("window-collapse")
        prec = min(g.prec, self.prec + g.shift)
        shift = g.shift
        K = prec - shift
        length = hi - lo + 1
        if K <= 0:
            return LaurentWindow.zero(p, d, prec, lo, hi, exact)
        mod = p**K
        bound = (g.n_max - g.n_min + 1) * d * (mod - 1) ** 2 + 1
        nbytes = (bound.bit_length() + 8) // 8
        sums = [0] * (2 * d - 1)
        for i, c in enumerate(g.coeffs):
            if not any(c):
                continue
            k = g.n_min + i
            packed = self._packed(k, K, lo, length, nbytes)
            for j in range(d):
                cj = c[j] % mod
                if cj:
                    for t in range(d):
                        if packed[t]:
                            sums[j + t] += cj * packed[t]
        vals = [(_unpack(s, length + d, nbytes)[:length] if s else [0] * length) for s in sums]
        coeffs = _combine(vals, p, d, K, length)
        return LaurentWindow(p, d, coeffs, lo, prec, shift, hi, exact)

    def _packed(self, k, K, lo, length, nbytes):
        key = (k, K, lo, length, nbytes)
        cache = self.__dict__.setdefault("_pcache", {})
        if key in cache:
            return cache[key]
        hk = self.powers[k]
        mod = self.p**K
        f = self.p**hk.shift if hk.shift > 0 else 1
        rows = []
        for n in range(lo, lo + length):
            if hk.n_min <= n <= hk.n_max:
                rows.append(hk.coeffs[n - hk.n_min])
            else:
                rows.append((0,) * self.deg)
        packed = [_pack([(r[j] * f) % mod for r in rows], nbytes) for j in range(self.deg)]
        cache[key] = packed
        return packed


def substitute(g: LaurentWindow, h: LaurentWindow, n_max: int | None = None) -> LaurentWindow:
    """g(h(T)) on the largest provably known window.

    ``h`` must have positive T-adic valuation; Laurent ``g`` needs ``h`` with a
    unit linear coefficient.  Without ``n_max`` an exact ``g`` and exact ``h``
    are composed completely.
    """
    v = h.t_valuation()
    if v == math.inf or v <= 0 or h.n_min < 0:
        raise WindowError("bad-substitution-target")
    if g.n_min < 0 and (v != 1 or h.coeff(1).valuation() != 0):
        raise WindowError("bad-substitution-target")
    wanted = n_max
    if n_max is None:
        if g.exact and h.exact:
            n_max = g.n_max * (h.n_max if g.n_max > 0 else v)
            n_max = max(n_max, v * g.n_min)
        elif g.exact:
            n_max = h.n_max + max(0, g.n_max - 1) * v if g.n_min >= 0 else h.n_max + g.n_min - 1
        else:
            n_max = v * (g.n_max + 1) - 1
    table = PowerTable(h, min(g.n_min, 0), max(g.n_max, 0), n_max, g.prec - g.shift)
    return table.apply(g, wanted)


def v_annulus(f: LaurentWindow, r) -> AnnulusValuation:
    """inf_n v_p(a_n) + n*r over the stored window.

    ``lower_bound_only`` is set when a coefficient vanishing at working
    precision, or the unseen tail above ``n_max`` (assumed no worse than
    the valuation floor of the stored coefficients), could undercut the
    computed infimum.  ``floor`` is then the certified lower bound.
    """
    r = Fraction(r)
    if r < 0:
        raise ValueError("r must be non-negative")
    best = math.inf
    shadow = math.inf
    for i, c in enumerate(f.coeffs):
        n = f.n_min + i
        if any(c):
            v = f.shift + min(vp_int(x, f.p) for x in c if x)
            best = min(best, v + n * r)
        else:
            shadow = min(shadow, f.prec + n * r)
    if not f.exact:
        floor = min(f.shift, 0) if best != math.inf else f.prec
        shadow = min(shadow, floor + (f.n_max + 1) * r)
    if best == math.inf:
        return AnnulusValuation(shadow, shadow != math.inf, shadow)
    return AnnulusValuation(best, shadow < best, min(best, shadow))


def v_box(f: LaurentWindow, s, r) -> AnnulusValuation:
    """inf over s <= r' <= r of v_annulus(f, r'), by the endpoint rule."""
    s, r = Fraction(s), Fraction(r)
    if s > r:
        raise ValueError("need s <= r")
    if s <= 0:
        raise ValueError("need s > 0")
    a, b = v_annulus(f, s), v_annulus(f, r)
    lo = a if a.value <= b.value else b
    floor = min(a.floor, b.floor)
    return AnnulusValuation(lo.value, floor < lo.value, floor)

"""Lubin-Tate formal groups for F = Q_{p^d} with uniformizer p.

The data of a formal group is the polynomial ``f`` (an endomorphism lifting
Frobenius).  Everything else is derived from it: the endomorphisms
``[a](T)``, the logarithm, the exponential, the group law, and the actions
of ``Gamma = O_F^x`` and of ``phi_q`` on series.
"""
from __future__ import annotations

import math
import random
import threading
from fractions import Fraction

from .padic import PadicScalar, _Field, _mulmod
from .series import LaurentWindow, WindowError, substitute, v_box


class LubinTateError(ValueError):
    pass


def _poly_mul_int(a, b, n_max):
    out = [0] * min(len(a) + len(b) - 1, n_max + 1)
    for i, x in enumerate(a):
        if x:
            for j, y in enumerate(b[: n_max + 1 - i]):
                out[i + j] += x * y
    return out


def parse_f_spec(spec, p: int, d: int) -> list[int]:
    """Coefficients of f, index = degree, from a keyword or an explicit list.

    ``"coeffs:c1,c2,..."`` lists the coefficients starting at degree 1.
    """
    q = p**d
    if isinstance(spec, str):
        if spec == "standard":
            coeffs = [0] * (q + 1)
            coeffs[1] = p
            coeffs[q] = 1
            return coeffs
        if spec == "cyclotomic":
            if d != 1:
                raise LubinTateError("cyclotomic f needs d = 1")
            return [0] + [math.comb(p, k) for k in range(1, p + 1)]
        if spec.startswith("coeffs:"):
            spec = [int(x) for x in spec[len("coeffs:"):].split(",") if x.strip()]
            spec = [0] + spec
        else:
            raise LubinTateError(f"unknown f specification {spec!r}")
    coeffs = [int(c) for c in spec]
    while len(coeffs) > 1 and coeffs[-1] == 0:
        coeffs.pop()
    if coeffs[0] != 0:
        raise LubinTateError("f must have zero constant term")
    if len(coeffs) < 2 or coeffs[1] != p:
        raise LubinTateError("f must be congruent to pT modulo degree 2")
    reduced = [c % p for c in coeffs] + [0] * max(0, q + 1 - len(coeffs))
    if reduced[q] != 1 or any(reduced[k] for k in range(len(reduced)) if k != q):
        raise LubinTateError("f must be congruent to T^q modulo p")
    return coeffs


class LubinTateData:
    """A Lubin-Tate formal group over O_F together with its caches.

    ``prec`` is the user-facing p-adic precision; internal computations run
    at ``work_prec = prec + guard``.
    """

    def __init__(self, p: int, d: int = 1, f="standard", prec: int = 12, window: int = 60, guard: int = 4):
        if p < 3 or any(p % k == 0 for k in range(2, math.isqrt(p) + 1)):
            raise LubinTateError("p must be an odd prime")
        if d < 1:
            raise LubinTateError("the degree d must be positive")
        self.p = p
        self.d = d
        self.q = p**d
        self.f_coeffs = parse_f_spec(f, p, d)
        self.f_label = f if isinstance(f, str) and not f.startswith("coeffs:") else "coeffs:" + ",".join(map(str, self.f_coeffs[1:]))
        self.prec = prec
        self.window = window
        self.guard = guard
        self._lock = threading.Lock()
        self._mult_cache: dict = {}
        self._fpow_cache: dict = {}
        self._log_cache: dict = {}
        self._exp_cache: dict = {}

    @property
    def work_prec(self):
        return self.prec + self.guard

    def __repr__(self):
        return f"LubinTateData(p={self.p}, d={self.d}, f={self.f_label!r}, prec={self.prec}, window={self.window})"

    def scalar(self, x, prec=None) -> PadicScalar:
        prec = self.work_prec if prec is None else prec
        if isinstance(x, PadicScalar):
            return x
        return PadicScalar.from_fraction(self.p, self.d, Fraction(x), prec)

    def f_series(self, prec=None) -> LaurentWindow:
        prec = self.work_prec if prec is None else prec
        coeffs = [(c,) + (0,) * (self.d - 1) for c in self.f_coeffs[1:]]
        return LaurentWindow(self.p, self.d, coeffs, 1, prec, 0, len(self.f_coeffs) - 1, True)

    def generator_prec(self):
        """Precision at which group elements should be supplied to [a]."""
        return self.work_prec + self.window_loss(self.window) + 1

    def window_loss(self, window):
        return int(math.floor(math.log(max(window, 1), self.q) + 1e-12))

    # -- powers of f (integer coefficients) ---------------------------------
    def _f_powers(self, window):
        """Rows F[i][k] = [T^k] f^i for 0 <= i, k <= window (exact integers)."""
        with self._lock:
            cached = self._fpow_cache.get(window)
            if cached is None:
                f = self.f_coeffs
                rows = [[1] + [0] * window]
                for _ in range(window):
                    nxt = _poly_mul_int(rows[-1], f, window)
                    rows.append(nxt + [0] * (window + 1 - len(nxt)))
                self._fpow_cache[window] = cached = rows
            return cached

    # -- endomorphisms ---------------------------------------------------------
    def mult_by(self, a, window: int | None = None) -> LaurentWindow:
        """The endomorphism [a](T), a in O_F, through T**window.

        Solved degree by degree from f([a](T)) = [a](f(T)): the unknown
        coefficient b_k enters with the factor p - p**k.
        """
        window = self.window if window is None else window
        if not isinstance(a, PadicScalar):
            a = self.scalar(a, self.generator_prec())
        if a.p != self.p or a.deg != self.d:
            raise LubinTateError("a must lie in O_F")
        if a.shift < 0:
            raise LubinTateError("a must lie in O_F")
        loss = self.window_loss(window)
        target = a.prec - loss
        if target <= 0:
            raise LubinTateError("precision-exhausted")
        key = (a.coeffs, a.prec, window, target)
        with self._lock:
            hit = self._mult_cache.get(key)
        if hit is not None:
            return hit
        b = self._mult_coeffs(a, window, target)
        res = LaurentWindow(self.p, self.d, b, 1, target, 0, window, False)
        with self._lock:
            self._mult_cache[key] = res
        return res

    def _mult_coeffs(self, a, window, target):
        p, d = self.p, self.d
        M = target + window + 2
        mod = p**M
        g = _Field.get(p, d).minpoly(M) if d > 1 else (0,)
        zero = (0,) * d
        F = self._f_powers(window)
        fc = self.f_coeffs
        deg_f = len(fc) - 1
        b = [zero, tuple(c % mod for c in a.coeffs)]
        # P[j][k] = [T^k] A^j for 2 <= j <= deg f, filled as b grows
        P = {j: [zero] * (window + 1) for j in range(1, deg_f + 1)}
        P[1][1] = b[1]
        for j in range(2, deg_f + 1):
            P[j][j] = _pow_mod(b[1], j, g, mod)
        for k in range(2, window + 1):
            # [T^k] A^j for j >= 2 only involves b_1..b_{k-1}
            for j in range(2, min(deg_f, k) + 1):
                if j == k:
                    continue  # already b_1**k
                acc = [0] * d
                prev = P[j - 1]
                for i in range(j - 1, k):
                    if any(prev[i]) and any(b[k - i]):
                        pr = _mulmod(prev[i], b[k - i], g, mod)
                        for t in range(d):
                            acc[t] += pr[t]
                P[j][k] = tuple(x % mod for x in acc)
            rhs = [0] * d
            for i in range(1, k):
                c = F[i][k]
                if c:
                    for t in range(d):
                        rhs[t] += c * b[i][t]
            for j in range(2, deg_f + 1):
                c = fc[j]
                if c:
                    for t in range(d):
                        rhs[t] -= c * P[j][k][t]
            rhs = [x % mod for x in rhs]
            if any(x % p for x in rhs):
                raise LubinTateError("internal-inconsistency")
            unit_inv = pow((1 - p ** (k - 1)) % mod, -1, mod)
            bk = tuple(((x // p) * unit_inv) % mod for x in rhs)
            b.append(bk)
            P[1][k] = bk
        out_mod = p**target
        return [tuple(x % out_mod for x in c) for c in b[1:]]

    def in_gamma_n(self, u: PadicScalar, n: int) -> bool:
        """u lies in Gamma_n, i.e. u = 1 mod p**n."""
        diff = u - 1
        return diff.is_zero() or diff.valuation() >= n

    # -- logarithm / exponential ---------------------------------------------
    def log_coeffs(self, window: int | None = None) -> list[Fraction]:
        """Exact coefficients l_0..l_window of the logarithm (l_1 = 1).

        From log(f(T)) = p log(T): l_k (p - p**k) = sum_{n<k} l_n [T^k] f^n.
        """
        window = self.window if window is None else window
        with self._lock:
            hit = self._log_cache.get(window)
        if hit is not None:
            return hit
        F = self._f_powers(window)
        p = self.p
        ell = [Fraction(0), Fraction(1)]
        for k in range(2, window + 1):
            s = sum((ell[n] * F[n][k] for n in range(1, k) if F[n][k]), Fraction(0))
            ell.append(s / (p - p**k))
        with self._lock:
            self._log_cache[window] = ell
        return ell

    def formal_log(self, window: int | None = None, method: str = "recursion", prec: int | None = None) -> LaurentWindow:
        window = self.window if window is None else window
        prec = self.work_prec if prec is None else prec
        if method == "limit":
            return self._log_by_limit(window, prec)
        ell = self.log_coeffs(window)
        return LaurentWindow.from_fractions(self.p, self.d, dict(enumerate(ell)), prec, 0, window)

    def _log_by_limit(self, window, prec, budget=None):
        """p**-n f^{o n} until two successive iterates agree on the window."""
        budget = 2 * window if budget is None else budget
        p = self.p
        extra = int(math.ceil(math.log(window + 1, p))) + 2
        f = self.f_series()
        prev = None
        it = LaurentWindow.monomial(p, self.d, 1, prec).restrict(window)
        for n in range(1, budget + 1):
            P = n + prec + extra
            f_n = f.lift(P)
            it = substitute(f_n, it.lift(P), n_max=window)
            cur = it.lift(P) / PadicScalar.from_int(p, self.d, p**n, P + n)
            cur = cur.truncate(prec)
            if prev is not None and cur.equals(prev, prec=prec):
                return cur
            prev = cur
        raise LubinTateError("formal-log did not stabilize within the iteration budget")

    def exp_coeffs(self, window: int | None = None) -> list[Fraction]:
        """Exact coefficients of the compositional inverse of the logarithm."""
        window = self.window if window is None else window
        with self._lock:
            hit = self._exp_cache.get(window)
        if hit is not None:
            return hit
        ell = self.log_coeffs(window)
        e = [Fraction(0), Fraction(1)]
        # P[j][k] = [T^k] E^j
        P = {1: [Fraction(0)] * (window + 1)}
        P[1][1] = Fraction(1)
        for j in range(2, window + 1):
            P[j] = [Fraction(0)] * (window + 1)
            P[j][j] = Fraction(1)
        for k in range(2, window + 1):
            for j in range(2, k):
                prev = P[j - 1]
                P[j][k] = sum((prev[i] * e[k - i] for i in range(j - 1, k) if prev[i] and e[k - i]), Fraction(0))
            s = sum((ell[j] * P[j][k] for j in range(2, k + 1) if ell[j]), Fraction(0))
            e.append(-s)
            P[1][k] = e[k]
        with self._lock:
            self._exp_cache[window] = e
        return e

    def formal_exp(self, window: int | None = None, prec: int | None = None) -> LaurentWindow:
        """exp_LT on the window; coefficients are rational, so some have
        negative valuation and the series carries a shift."""
        window = self.window if window is None else window
        prec = self.work_prec if prec is None else prec
        e = self.exp_coeffs(window)
        return LaurentWindow.from_fractions(self.p, self.d, dict(enumerate(e)), prec, 0, window)

    def group_law(self, degree: int | None = None) -> dict[tuple[int, int], Fraction]:
        """G(X, Y) = exp(log X + log Y) through total degree ``degree``.

        Returned as ``{(i, j): coefficient of X^i Y^j}`` with exact rationals.
        """
        degree = self.window if degree is None else degree
        ell = self.log_coeffs(degree)
        e = self.exp_coeffs(degree)
        S = {}
        for k in range(1, degree + 1):
            if ell[k]:
                S[(k, 0)] = S.get((k, 0), 0) + ell[k]
                S[(0, k)] = S.get((0, k), 0) + ell[k]
        G = {}
        power = {(0, 0): Fraction(1)}
        for n in range(1, degree + 1):
            power = _bivariate_mul(power, S, degree)
            if e[n]:
                for key, c in power.items():
                    G[key] = G.get(key, 0) + e[n] * c
        return {k: v for k, v in G.items() if v}

    # -- actions -------------------------------------------------------------
    def gamma_act(self, u, f: LaurentWindow) -> LaurentWindow:
        """gamma_u(f) = f([u](T)); coefficients are untouched."""
        if not isinstance(u, PadicScalar):
            u = self.scalar(u, self.generator_prec())
        if u.shift < 0 or u.valuation() != 0:
            raise LubinTateError("u must be a unit of O_F")
        width = f.n_max - min(f.n_min, 0) + 1 if f.n_min < 0 else f.n_max
        h = self.mult_by(u, max(width, 1))
        return substitute(f, h)

    def phi_act(self, f: LaurentWindow) -> LaurentWindow:
        """phi_q(f) = f(f_pi(T)), for power series f."""
        if f.n_min < 0 and any(any(c) for c in f.coeffs[: -f.n_min]):
            raise WindowError("bad-substitution-target")
        return substitute(f, self.f_series(f.prec))

    # -- serialization -------------------------------------------------------
    def to_json(self) -> dict:
        return {"p": self.p, "deg": self.d, "f": self.f_coeffs, "prec": self.prec, "window": self.window, "guard": self.guard}

    @classmethod
    def from_json(cls, data: dict) -> "LubinTateData":
        return cls(data["p"], data["deg"], data["f"], data.get("prec", 12), data.get("window", 60), data.get("guard", 4))


def _pow_mod(a, e, g, mod):
    r = (1,) + (0,) * (len(a) - 1)
    while e:
        if e & 1:
            r = _mulmod(r, a, g, mod)
        a = _mulmod(a, a, g, mod)
        e >>= 1
    return r


def _bivariate_mul(A, B, degree):
    out = {}
    for (i, j), a in A.items():
        for (k, l), b in B.items():
            if i + j + k + l <= degree:
                key = (i + k, j + l)
                out[key] = out.get(key, 0) + a * b
    return out


def bivariate_compose(G, X, Y, degree):
    """G(X(.), Y(.)) for trivariate-free use: X, Y are bivariate dicts too."""
    out = {}
    cache_x = {0: {(0, 0): Fraction(1)}}
    cache_y = {0: {(0, 0): Fraction(1)}}

    def xp(i):
        if i not in cache_x:
            cache_x[i] = _bivariate_mul(xp(i - 1), X, degree)
        return cache_x[i]

    def yp(j):
        if j not in cache_y:
            cache_y[j] = _bivariate_mul(yp(j - 1), Y, degree)
        return cache_y[j]

    for (i, j), c in G.items():
        if i + j > degree:
            continue
        for key, v in _bivariate_mul(xp(i), yp(j), degree).items():
            out[key] = out.get(key, 0) + c * v
    return {k: v for k, v in out.items() if v}


# ---------------------------------------------------------------------------
# valuation gain under Gamma_n


def random_unit_near_one(lt: LubinTateData, n: int, rng: random.Random, prec=None) -> PadicScalar:
    prec = lt.generator_prec() if prec is None else prec
    coeffs = [rng.randrange(lt.p ** max(prec - n, 0)) for _ in range(lt.d)]
    w = PadicScalar(lt.p, lt.d, coeffs, prec)
    return w * lt.p**n + 1


def random_laurent(lt: LubinTateData, rng: random.Random, n_min=-4, n_max=None, prec=None, sparse=0.5, max_shift=2):
    """Random Laurent window whose coefficients have varied valuations."""
    prec = lt.work_prec if prec is None else prec
    n_max = lt.window if n_max is None else n_max
    p, d = lt.p, lt.d
    vals = {}
    for n in range(n_min, n_max + 1):
        if rng.random() < sparse:
            continue
        v = rng.randrange(0, max_shift + 1)
        c = tuple(rng.randrange(p**prec) for _ in range(d))
        vals[n] = PadicScalar(p, d, c, prec) * p**v
    if not vals:
        vals[n_min] = PadicScalar.from_int(p, d, 1, prec)
    return LaurentWindow.from_scalars(vals, n_min, n_max, prec, False, p, d)


def valuation_gain_search(lt: LubinTateData, s, r, samples: int = 100, n_budget: int = 6, seed: int = 0, f_window=(-4, 8), window=None):
    """Least n <= n_budget such that every sampled u = 1 mod p**n and f give
    v^{[s,r]}((gamma_u - 1) f) >= v^{[s,r]}(f) + 2.

    Returns ``(n, violations_at_n, records)``; n is None when no n works.
    Only certified values count: a gain is accepted when the computed
    valuation, a rigorous lower bound, clears the threshold.
    """
    s, r = Fraction(s), Fraction(r)
    rng = random.Random(seed)
    window = lt.window if window is None else window
    fs = [random_laurent(lt, rng, f_window[0], f_window[1]) for _ in range(samples)]
    records = []
    for n in range(1, n_budget + 1):
        bad = 0
        for f in fs:
            u = random_unit_near_one(lt, n, rng)
            g = lt.gamma_act(u, f.extend(window) if f.exact else _pad(f, window))
            diff = g - _pad(f, g.n_max)
            lhs = v_box(diff, s, r).floor
            rhs = v_box(f, s, r).value + 2
            if lhs < rhs:
                bad += 1
        records.append((n, bad))
        if bad == 0:
            return n, 0, records
    return None, records[-1][1], records


def _pad(f: LaurentWindow, n_max):
    """Treat the stored coefficients of f as the whole series (a Laurent polynomial)."""
    exact = LaurentWindow(f.p, f.deg, f.coeffs, f.n_min, f.prec, f.shift, f.n_max, True)
    if n_max <= f.n_max:
        return exact.truncate(n_max=n_max)
    return exact.extend(n_max).restrict(n_max)

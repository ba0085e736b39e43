"""(phi_q, Gamma)-modules over the windowed Robba model.

A module of rank r is given by its Frobenius matrix and by matrices for the
action of a few stored generators of Gamma = O_F^x: the torsion generator
``zeta`` and the pro-p generators ``u_i = exp(p * e_i * beta_i)`` with
``beta_i = omega**(i-1)``.  Usually ``e_i = 1``; a larger power of p means
only an open subgroup acts (enough for every Lie-algebra computation).

Conventions, for x = sum x_j e_j with coordinate column c:

* gamma_u(x) has coordinates ``Mat_u * gamma_u(c)``, so the cocycle rule is
  ``Mat_{uv} = Mat_u * gamma_u(Mat_v)``;
* phi(x) has coordinates ``Phi * phi(c)``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable

from .lubin_tate import LubinTateData, random_laurent
from .padic import (
    AtLeast,
    PadicScalar,
    _Field,
    _mulmod,
    frobenius,
    padic_exp,
    padic_log,
    teichmuller,
)
from .series import LaurentWindow, WindowError, v_box


class ModuleError(ValueError):
    pass


class DecompositionError(ModuleError):
    pass


# ---------------------------------------------------------------------------
# small matrix layer over LaurentWindow

Matrix = list  # list of rows of LaurentWindow


def const(lt: LubinTateData, c, prec=None) -> LaurentWindow:
    if isinstance(c, LaurentWindow):
        return c
    prec = lt.work_prec if prec is None else prec
    if not isinstance(c, PadicScalar):
        c = PadicScalar.from_fraction(lt.p, lt.d, Fraction(c), prec)
    return LaurentWindow.constant(c)


def is_constant(s: LaurentWindow) -> bool:
    if s.exact and s.n_min >= 0 and s.n_max <= 0:
        return True
    return all(n == 0 for n, _ in s.items()) and s.exact


def constant_value(s: LaurentWindow) -> PadicScalar:
    return s.coeff(0)


def mat_identity(lt, r, prec=None):
    return [[const(lt, 1 if i == j else 0, prec) for j in range(r)] for i in range(r)]


def mat_zero(lt, rows, cols, prec=None):
    return [[const(lt, 0, prec) for _ in range(cols)] for _ in range(rows)]


def mat_mul(A, B):
    n, k, m = len(A), len(B), len(B[0])
    out = []
    for i in range(n):
        row = []
        for j in range(m):
            acc = None
            for t in range(k):
                a, b = A[i][t], B[t][j]
                if a.is_zero() and a.exact or b.is_zero() and b.exact:
                    term = _zero_like(a, b)
                else:
                    term = a * b
                acc = term if acc is None else acc + term
            row.append(acc)
        out.append(row)
    return out


def _zero_like(a, b):
    prec = min(a.prec, b.prec)
    return LaurentWindow.zero(a.p, a.deg, prec)


def mat_add(A, B):
    return [[a + b for a, b in zip(ra, rb)] for ra, rb in zip(A, B)]


def mat_sub(A, B):
    return [[a - b for a, b in zip(ra, rb)] for ra, rb in zip(A, B)]


def mat_scale(A, c):
    return [[a * c if isinstance(c, LaurentWindow) else a.scale(c) for a in row] for row in A]


def mat_map(A, fn):
    return [[fn(a) for a in row] for row in A]


def mat_equals(A, B, prec=None):
    return all(a.equals(b, prec) for ra, rb in zip(A, B) for a, b in zip(ra, rb))


def mat_is_zero(A):
    return all(a.is_zero() for row in A for a in row)


def mat_inverse(A):
    """Gauss-Jordan over windowed series with invertible pivots."""
    n = len(A)
    if n == 1:
        return [[series_inverse(A[0][0])]]
    M = [list(row) + [_unit(A[0][0], i, j) for j in range(n)] for i, row in enumerate(A)]
    for col in range(n):
        piv = None
        for r in range(col, n):
            try:
                inv = series_inverse(M[r][col])
            except (WindowError, ZeroDivisionError):
                continue
            piv = r
            break
        if piv is None:
            raise ModuleError("matrix not invertible over the window")
        M[col], M[piv] = M[piv], M[col]
        M[col] = [e * inv for e in M[col]]
        for r in range(n):
            if r != col and not (M[r][col].is_zero() and M[r][col].exact):
                fac = M[r][col]
                M[r] = [a - fac * b for a, b in zip(M[r], M[col])]
    return [row[n:] for row in M]


def _unit(like, i, j):
    return LaurentWindow.constant(PadicScalar.from_int(like.p, like.deg, 1 if i == j else 0, like.prec))


def series_inverse(s: LaurentWindow) -> LaurentWindow:
    if is_constant(s):
        return LaurentWindow.constant(constant_value(s).inverse())
    return s.inverse()


def mat_min_valuation(A):
    best = math.inf
    for row in A:
        for a in row:
            if not a.is_zero():
                best = min(best, a.valuation_floor())
    return best


def mat_prec(A):
    return min(a.prec for row in A for a in row)


def mat_to_json(A):
    return [[a.to_json() for a in row] for row in A]


def mat_from_json(data):
    return [[LaurentWindow.from_json(a) for a in row] for row in data]


def fit(s: LaurentWindow, window: int) -> LaurentWindow:
    """Bring a coordinate to the module window (constants stay exact)."""
    if s.exact:
        if is_constant(s):
            return s
        if s.n_max <= window:
            return s.extend(window).restrict(window)
        return s.restrict(window)
    if s.n_max > window:
        return s.restrict(window)
    return s


# ---------------------------------------------------------------------------


@dataclass
class ModuleVector:
    coords: list

    @property
    def rank(self):
        return len(self.coords)

    @property
    def prec(self):
        return min(c.prec for c in self.coords)

    def __add__(self, other):
        return ModuleVector([a + b for a, b in zip(self.coords, other.coords)])

    def __sub__(self, other):
        return ModuleVector([a - b for a, b in zip(self.coords, other.coords)])

    def scale(self, c):
        if isinstance(c, LaurentWindow):
            return ModuleVector([c * a for a in self.coords])
        return ModuleVector([a.scale(c) if not isinstance(c, (int, Fraction)) else a * c for a in self.coords])

    def is_zero(self):
        return all(c.is_zero() for c in self.coords)

    def equals(self, other, prec=None, n_max=None):
        return all(a.equals(b, prec, n_max) for a, b in zip(self.coords, other.coords))

    def deficit(self, other):
        return min(a.deficit(b) for a, b in zip(self.coords, other.coords))

    def truncate(self, prec=None, n_max=None):
        return ModuleVector([c.truncate(prec, n_max) for c in self.coords])

    def lift(self, prec):
        return ModuleVector([c.lift(prec) for c in self.coords])

    def v_box(self, s, r):
        vals = [v_box(c, s, r) for c in self.coords]
        return min(v.floor for v in vals)

    def to_json(self):
        return {"coords": [c.to_json() for c in self.coords]}

    @classmethod
    def from_json(cls, data):
        return cls([LaurentWindow.from_json(c) for c in data["coords"]])


def apply_matrix(A, x: ModuleVector) -> ModuleVector:
    col = [[c] for c in x.coords]
    return ModuleVector([row[0] for row in mat_mul(A, col)])


# ---------------------------------------------------------------------------
# characters


@dataclass
class TwistCharacter:
    """A character of F^x given on pi, on zeta and on the pro-p generators.

    ``values[i]`` is delta(u_{i+1}) or None when only a power is known; then
    ``deferred[i] = (e, delta(u_{i+1}**e))`` records the root obligation.
    """

    p: int
    d: int
    at_pi: PadicScalar
    at_zeta: PadicScalar
    values: list
    deferred: dict = field(default_factory=dict)
    label: str = ""

    def is_L_rational(self):
        return not self.deferred

    def exponents(self):
        return [self.deferred[i][0] if i in self.deferred else 1 for i in range(self.d)]

    def generator_values(self):
        """delta on the stored generators u_i**e_i."""
        out = []
        for i in range(self.d):
            if i in self.deferred:
                out.append(self.deferred[i][1])
            else:
                out.append(self.values[i])
        return out

    def to_json(self):
        return {
            "p": self.p,
            "deg": self.d,
            "pi": self.at_pi.to_json(),
            "zeta": self.at_zeta.to_json(),
            "values": [v.to_json() if v is not None else None for v in self.values],
            "deferred": [{"generator": i + 1, "e": e, "value": v.to_json()} for i, (e, v) in sorted(self.deferred.items())],
            "label": self.label,
        }

    @classmethod
    def from_json(cls, data):
        values = [PadicScalar.from_json(v) if v is not None else None for v in data["values"]]
        deferred = {item["generator"] - 1: (item["e"], PadicScalar.from_json(item["value"])) for item in data.get("deferred", [])}
        return cls(data["p"], data["deg"], PadicScalar.from_json(data["pi"]), PadicScalar.from_json(data["zeta"]), values, deferred, data.get("label", ""))


class GroupCoordinates:
    """Generators of O_F^x and the decomposition u = zeta**k * prod g_i**a_i."""

    def __init__(self, lt: LubinTateData, exponents=None):
        self.lt = lt
        self.p, self.d = lt.p, lt.d
        self.exponents = list(exponents) if exponents else [1] * lt.d
        self._cache = {}

    def beta(self, i, prec):
        """i-th basis element omega**i of O_F (0-based)."""
        c = [0] * self.d
        c[i] = 1
        return PadicScalar(self.p, self.d, c, prec)

    def zeta(self, prec):
        key = ("zeta", prec)
        if key not in self._cache:
            if self.d == 1:
                self._cache[key] = PadicScalar.omega(self.p, 1, prec)
            else:
                self._cache[key] = teichmuller((0, 1) + (0,) * (self.d - 2), self.p, self.d, prec)
        return self._cache[key]

    def generator(self, i, prec):
        """g_i = exp(p * e_i * beta_i)."""
        key = ("u", i)
        hit = self._cache.get(key)
        if hit is None or hit.prec < prec:
            arg = self.beta(i, prec + 2) * (self.p * self.exponents[i])
            hit = padic_exp(arg).truncate(prec)
            self._cache[key] = hit
        return hit if hit.prec == prec else hit.truncate(prec)

    def names(self):
        return ["zeta"] + [f"u{i + 1}" for i in range(self.d)]

    def by_name(self, name, prec):
        if name == "zeta":
            return self.zeta(prec)
        return self.generator(int(name[1:]) - 1, prec)

    def torsion_log(self, u: PadicScalar) -> int:
        """k with u = zeta**k modulo p."""
        res = u.residue()
        if not any(res):
            raise DecompositionError("not a unit")
        p, d = self.p, self.d
        g = _Field.get(p, d).minpoly(1) if d > 1 else (0,)
        z = self.zeta(1).residue()
        cur = (1,) + (0,) * (d - 1)
        for k in range(p**d - 1):
            if cur == res:
                return k
            cur = _mulmod(cur, z, g, p) if d > 1 else ((cur[0] * z[0]) % p,)
        raise DecompositionError("discrete log failed")

    def decompose(self, u: PadicScalar):
        """Return (k, a) with u = zeta**k * prod g_i**a_i, a_i in Z_p as Fractions.

        The a_i are returned as PadicScalars of degree 1 precision; raises
        DecompositionError when u is outside the stored open subgroup.
        """
        k = self.torsion_log(u)
        prec = u.prec
        up = u * self.zeta(prec + 2) ** (-k) if k else u
        L = padic_log(up)
        coords = L.rational_coeffs()
        a = []
        for i in range(self.d):
            x = coords[i] / (self.p * self.exponents[i])
            if x != 0 and _vp(x, self.p) < 0:
                raise DecompositionError("unit outside the stored open subgroup")
            a.append(PadicScalar.from_fraction(self.p, 1, x, max(L.prec - 1 - _vp(self.p * self.exponents[i], self.p) + 1, 1)))
        return k, a


def _vp(x: Fraction, p):
    from .padic import vp_fraction

    return vp_fraction(Fraction(x), p)


def small_integer(a: PadicScalar, bound=10**9):
    """The integer represented by a p-adic integer, if it is small."""
    if a.is_zero():
        return 0
    mod = a.p ** a.prec
    c = a.coeffs[0] % mod
    if a.shift != 0:
        return None
    if c <= bound:
        return c
    if mod - c <= bound:
        return c - mod
    return None


def scalar_power(x: PadicScalar, a: PadicScalar):
    """x**a for a principal unit x and a in Z_p."""
    if a.is_zero():
        return x._coerce(1).truncate(x.prec)
    lx = padic_log(x)
    alift = PadicScalar(x.p, x.deg, (a.coeffs[0],) + (0,) * (x.deg - 1), a.prec, a.shift)
    return padic_exp(lx * alift)


def character_value(coords: GroupCoordinates, at_zeta, gen_values, u: PadicScalar):
    """delta(u) from delta(zeta) and delta(g_i), via the decomposition of u."""
    k, a = coords.decompose(u)
    val = at_zeta ** k if k else at_zeta._coerce(1).truncate(at_zeta.prec)
    for ai, gv in zip(a, gen_values):
        if ai.is_zero():
            continue
        if (gv - 1).valuation() >= 1:
            val = val * scalar_power(gv, ai)
        else:
            n = small_integer(ai)
            if n is None:
                raise DecompositionError("generator value is not a principal unit")
            val = val * gv**n
    return val


# ---------------------------------------------------------------------------


class PhiGammaModule:
    """Free module of finite rank with commuting phi_q and Gamma actions."""

    def __init__(self, lt: LubinTateData, rank: int, phi: Matrix, gamma: dict, exponents=None, label="", window=None, radii=(Fraction(1, 2), Fraction(1)), validate=True):
        self.lt = lt
        self.rank = rank
        self.phi = phi
        self.gamma = dict(gamma)
        self.coords = GroupCoordinates(lt, exponents)
        self.label = label
        self.window = lt.window if window is None else window
        self.radii = tuple(Fraction(x) for x in radii)
        self._mat_cache: dict = {}
        missing = [n for n in self.coords.names() if n not in self.gamma]
        if missing:
            raise ModuleError(f"missing generator matrices: {missing}")
        if validate:
            self.validate()

    @property
    def exponents(self):
        return self.coords.exponents

    @property
    def prec(self):
        mats = [self.phi] + list(self.gamma.values())
        return min(mat_prec(m) for m in mats)

    def is_constant_diagonal(self):
        mats = [self.phi] + list(self.gamma.values())
        for m in mats:
            for i, row in enumerate(m):
                for j, a in enumerate(row):
                    if i != j and not a.is_zero():
                        return False
                    if not is_constant(a):
                        return False
        return True

    # -- construction helpers -------------------------------------------------
    def vector(self, coords) -> ModuleVector:
        out = []
        for c in coords:
            if not isinstance(c, LaurentWindow):
                c = const(self.lt, c)
            out.append(fit(c, self.window))
        return ModuleVector(out)

    def basis_vector(self, j, coeff=None):
        coords = [const(self.lt, 0) for _ in range(self.rank)]
        coords[j] = const(self.lt, 1) if coeff is None else coeff
        return self.vector(coords)

    # -- action matrices -----------------------------------------------------
    def _gen_prec(self, prec):
        return prec + self.lt.window_loss(self.window) + 1

    def gamma_matrix(self, u: PadicScalar) -> Matrix:
        """Mat(gamma_u) in the fixed basis."""
        key = (u.coeffs, u.prec, u.shift)
        hit = self._mat_cache.get(key)
        if hit is not None:
            return hit
        for name in self.coords.names():
            g = self.coords.by_name(name, u.prec)
            if (u - g).is_zero():
                return self.gamma[name]
        if self.is_constant_diagonal():
            M = self._diagonal_rule(u)
        else:
            M = self._cocycle_matrix(u)
        self._mat_cache[key] = M
        return M

    def _diagonal_rule(self, u):
        out = mat_zero(self.lt, self.rank, self.rank, self.prec)
        for j in range(self.rank):
            at_zeta = constant_value(self.gamma["zeta"][j][j])
            gens = [constant_value(self.gamma[f"u{i + 1}"][j][j]) for i in range(self.lt.d)]
            out[j][j] = LaurentWindow.constant(character_value(self.coords, at_zeta, gens, u))
        return out

    def _cocycle_matrix(self, u):
        k, a = self.coords.decompose(u)
        exps = []
        for ai in a:
            n = small_integer(ai)
            if n is None:
                raise DecompositionError("decomposition failure: exponent is not a small integer")
            exps.append(n)
        prec = u.prec
        acc = None
        parts = [("zeta", k)] + [(f"u{i + 1}", n) for i, n in enumerate(exps)]
        for name, n in parts:
            if n == 0:
                continue
            g = self.coords.by_name(name, prec)
            piece = self._power(g, self.gamma[name], n)
            acc = piece if acc is None else self._compose(acc, piece)
        if acc is None:
            return mat_identity(self.lt, self.rank, self.prec)
        return acc[1]

    def _compose(self, A, B):
        """(u, Mat_u), (v, Mat_v) -> (uv, Mat_u * gamma_u(Mat_v))."""
        u, Mu = A
        v, Mv = B
        return (u * v, mat_mul(Mu, self.act_matrix(u, Mv)))

    def _power(self, g, M, n):
        if n < 0:
            ginv = g.inverse()
            Minv = self.act_matrix(ginv, mat_inverse(M))
            return self._power(ginv, Minv, -n)
        result = None
        base = (g, M)
        while n:
            if n & 1:
                result = base if result is None else self._compose(result, base)
            n >>= 1
            if n:
                base = self._compose(base, base)
        return result

    def act_matrix(self, u, M):
        return mat_map(M, lambda s: s if is_constant(s) else self.lt.gamma_act(u, fit(s, self.window)))

    # -- actions on vectors --------------------------------------------------
    def apply_gamma(self, u: PadicScalar, x: ModuleVector, A=None) -> ModuleVector:
        A = self.gamma_matrix(u) if A is None else A
        moved = ModuleVector([c if is_constant(c) else self.lt.gamma_act(u, c) for c in x.coords])
        return apply_matrix(A, moved)

    def apply_phi(self, x: ModuleVector) -> ModuleVector:
        moved = ModuleVector([c if is_constant(c) else self.lt.phi_act(c) for c in x.coords])
        return apply_matrix(self.phi, moved)

    # -- validation ----------------------------------------------------------
    def validate(self, prec=None):
        """Commutation with phi and cocycle consistency on stored generators."""
        names = self.coords.names()
        gp = self._gen_prec(self.lt.work_prec)
        mats = [self.phi] + [self.gamma[n] for n in names]
        if all(is_constant(a) for m in mats for row in m for a in row):
            # constant matrices commute with the base actions; check the group relations only
            for n1 in names:
                for n2 in names:
                    A = mat_mul(self.gamma[n1], self.gamma[n2])
                    B = mat_mul(self.gamma[n2], self.gamma[n1])
                    if not mat_equals(A, B, prec):
                        raise ModuleError("cocycle consistency failure")
                    C = mat_mul(self.gamma[n1], self.phi)
                    D = mat_mul(self.phi, self.gamma[n1])
                    if not mat_equals(C, D, prec):
                        raise ModuleError("phi and Gamma do not commute")
            return True
        for name in names:
            g = self.coords.by_name(name, gp)
            M = self.gamma[name]
            lhs = mat_mul(M, self.act_matrix(g, self.phi))
            rhs = mat_mul(self.phi, mat_map(M, lambda s: s if is_constant(s) else self.lt.phi_act(fit(s, self.window))))
            if not mat_equals(lhs, rhs, prec):
                raise ModuleError("phi and Gamma do not commute")
        for i, n1 in enumerate(names):
            for n2 in names[i + 1:]:
                g1, g2 = self.coords.by_name(n1, gp), self.coords.by_name(n2, gp)
                A = mat_mul(self.gamma[n1], self.act_matrix(g1, self.gamma[n2]))
                B = mat_mul(self.gamma[n2], self.act_matrix(g2, self.gamma[n1]))
                if not mat_equals(A, B, prec):
                    raise ModuleError("cocycle consistency failure")
        return True

    # -- serialization -------------------------------------------------------
    def to_json(self):
        out = {
            "rank": self.rank,
            "phi": mat_to_json(self.phi),
            "gamma": {n: mat_to_json(m) for n, m in self.gamma.items()},
            "lt": self.lt.to_json(),
            "label": self.label,
            "window": self.window,
        }
        if any(e != 1 for e in self.exponents):
            out["exponents"] = list(self.exponents)
        return out

    @classmethod
    def from_json(cls, data, lt=None):
        lt = LubinTateData.from_json(data["lt"]) if lt is None else lt
        return cls(
            lt,
            data["rank"],
            mat_from_json(data["phi"]),
            {n: mat_from_json(m) for n, m in data["gamma"].items()},
            data.get("exponents"),
            data.get("label", ""),
            data.get("window"),
            validate=False,
        )

    def __repr__(self):
        return f"PhiGammaModule(rank={self.rank}, label={self.label!r}, {self.lt!r})"


# ---------------------------------------------------------------------------
# constructors


def rank1_from_character(lt: LubinTateData, delta: TwistCharacter, label=None, window=None) -> PhiGammaModule:
    if not delta.is_L_rational():
        raise ModuleError("character-not-L-rational")
    gam = {"zeta": [[const(lt, delta.at_zeta)]]}
    for i, v in enumerate(delta.values):
        gam[f"u{i + 1}"] = [[const(lt, v)]]
    return PhiGammaModule(lt, 1, [[const(lt, delta.at_pi)]], gam, label=label or delta.label, window=window)


def character_from_function(lt: LubinTateData, fn: Callable, at_pi, label="", prec=None) -> TwistCharacter:
    """Sample a character u -> fn(u) on the stored generators."""
    prec = lt.work_prec + 8 if prec is None else prec
    gc = GroupCoordinates(lt)
    vals = [fn(gc.generator(i, prec)) for i in range(lt.d)]
    if not isinstance(at_pi, PadicScalar):
        at_pi = PadicScalar.from_fraction(lt.p, lt.d, Fraction(at_pi), prec)
    return TwistCharacter(lt.p, lt.d, at_pi, fn(gc.zeta(prec)), vals, {}, label)


def trivial_character(lt, prec=None):
    return character_from_function(lt, lambda u: u._coerce(1).truncate(u.prec), 1, "trivial", prec)


def identity_character(lt, prec=None):
    return character_from_function(lt, lambda u: u, lt.p, "identity-char", prec)


def frobenius_character(lt, prec=None):
    return character_from_function(lt, frobenius, 1, "frobenius", prec)


def teichmuller_character(lt, u: PadicScalar):
    return teichmuller(u.residue(), lt.p, lt.d, u.prec)


def mixed_character(lt, a: int, b: int, k: int, pi_value=1, prec=None) -> TwistCharacter:
    """u -> sigma(u)**a * u**b * tau(u)**k with tau the Teichmuller character."""

    def fn(u):
        val = u._coerce(1).truncate(u.prec)
        if a:
            val = val * frobenius(u) ** a
        if b:
            val = val * u**b
        if k:
            val = val * teichmuller_character(lt, u) ** k
        return val

    return character_from_function(lt, fn, pi_value, f"mixed(a={a},b={b},k={k})", prec)


def demo_module(name: str, lt: LubinTateData | None = None) -> PhiGammaModule:
    if name == "trivial":
        lt = lt or LubinTateData(3, 2)
        return rank1_from_character(lt, trivial_character(lt))
    if name == "identity-char":
        lt = lt or LubinTateData(3, 2)
        return rank1_from_character(lt, identity_character(lt))
    if name == "frobenius-demo":
        lt = lt or LubinTateData(3, 2)
        if lt.d < 2:
            raise ModuleError("frobenius-demo needs d >= 2")
        return rank1_from_character(lt, frobenius_character(lt), "frobenius-demo")
    raise ModuleError(f"unknown demo module {name!r}")


def hom_module(Delta: PhiGammaModule, D: PhiGammaModule) -> PhiGammaModule:
    """Hom(Delta, D) with (g.h) = g_D o h o g_Delta^{-1}.

    Coordinates of h are its matrix entries H[i][j] (i over D, j over
    Delta) in row-major order; Mat(g.h) acts as H -> B g(H) A^{-1}.
    """
    if Delta.lt is not D.lt and Delta.lt.to_json() != D.lt.to_json():
        raise ModuleError("modules over different bases")
    lt = D.lt
    rD, rA = D.rank, Delta.rank

    def kron(B, Ainv):
        # vec(B X Ainv) with row-major vec: entry (i,j) <- sum B[i][k] X[k][l] Ainv[l][j]
        n = rD * rA
        out = mat_zero(lt, n, n)
        for i in range(rD):
            for j in range(rA):
                for k in range(rD):
                    for l in range(rA):
                        a, b = B[i][k], Ainv[l][j]
                        if (a.is_zero() and a.exact) or (b.is_zero() and b.exact):
                            continue
                        out[i * rA + j][k * rA + l] = a * b
        return out

    phi = kron(D.phi, mat_inverse(Delta.phi))
    gam = {}
    for name in D.coords.names():
        gam[name] = kron(D.gamma[name], mat_inverse(Delta.gamma[name]))
    if list(Delta.exponents) != list(D.exponents):
        raise ModuleError("modules store different open subgroups")
    return PhiGammaModule(lt, rD * rA, phi, gam, D.exponents, f"Hom({Delta.label},{D.label})", min(D.window, Delta.window))


# ---------------------------------------------------------------------------
# Lie algebra operators


@dataclass
class LogGammaInfo:
    m: int
    terms: int
    slack: int
    prec: int


def _probe_vectors(M: PhiGammaModule, x: ModuleVector):
    lt = M.lt
    ks = [k for k in (-1, 1, 2, lt.q) if k <= M.window]
    probes = [x]
    for j in range(M.rank):
        for k in ks:
            probes.append(M.basis_vector(j, fit(LaurentWindow.monomial(lt.p, lt.d, k, lt.work_prec), M.window)))
    return probes


def _gain_ok(M, w, probes, s, r):
    for z in probes:
        if z.is_zero():
            continue
        y = M.apply_gamma(w, z) - z
        if y.is_zero():
            continue
        if y.v_box(s, r) < z.v_box(s, r) + 2:
            return False
    return True


def choose_m(M: PhiGammaModule, u: PadicScalar, x: ModuleVector, m_budget=8):
    s, r = M.radii
    probes = _probe_vectors(M, x)
    w = u
    for m in range(m_budget + 1):
        if _gain_ok(M, w, probes, s, r):
            return m, w
        w = w**M.lt.p
    raise ModuleError("log-gamma-nonconvergent")


def _check_pro_p(M, u):
    if (u - 1).valuation() < 1:
        raise ModuleError("log_gamma needs u = 1 mod p")


def log_gamma_series(M: PhiGammaModule, u: PadicScalar, x: ModuleVector, m=None, max_terms=2000):
    """(1/p^m) sum_i (-1)^(i-1) (gamma_w - 1)^i x / i with w = u**(p**m)."""
    _check_pro_p(M, u)
    if m is None:
        m, w = choose_m(M, u, x)
    else:
        w = u ** (M.lt.p**m)
    p = M.lt.p
    start = x.prec
    y = x
    total = None
    i = 0
    while True:
        i += 1
        if i > max_terms:
            raise ModuleError("log-gamma-nonconvergent")
        y = M.apply_gamma(w, y) - y
        if y.is_zero():
            break
        term = y.scale(Fraction((-1) ** (i - 1), i))
        total = term if total is None else total + term
    if total is None:
        total = ModuleVector([c * 0 for c in x.coords])
    # later terms vanish modulo p^prec; dividing them by j still costs digits
    tail = int(math.floor(math.log(2 * i + 1, p)))
    prec = min(total.prec, y.prec - tail)
    total = total.truncate(prec)
    result = total.scale(Fraction(1, p**m))
    slack = start - result.prec
    return result, LogGammaInfo(m, i, slack, result.prec)


def _relift(M: PhiGammaModule, u: PadicScalar, prec):
    """u at higher precision; stored generators are recomputed, not padded."""
    for name in M.coords.names():
        if (u - M.coords.by_name(name, u.prec)).is_zero():
            return M.coords.by_name(name, prec)
    return u.lift(prec)


def log_gamma_limit(M: PhiGammaModule, u: PadicScalar, x: ModuleVector, target: int, n_start=1, extra=12):
    """lim (gamma_{u^(p^n)} x - x) / p^n, on lifted representatives.

    The module is lifted once; Mat(gamma_{u^(p^n)}) comes from the previous
    step by a p-th power, so each n costs a couple of compositions.
    """
    _check_pro_p(M, u)
    p = M.lt.p
    n_cap = target + extra
    work = target + n_cap + 2
    xl = x.lift(work)
    Ml = M if M.prec >= work else lift_module(M, work)
    ul = _relift(M, u, work + M.lt.window_loss(M.window) + n_cap + 2)
    pair = (ul, Ml.gamma_matrix(ul)) if not Ml.is_constant_diagonal() else None
    prev = None
    for n in range(1, n_cap + 1):
        if pair is not None:
            pair = Ml._power(pair[0], pair[1], p)
            w, A = pair
        else:
            w, A = ul ** (p**n), None
        if n < n_start:
            continue
        y = Ml.apply_gamma(w, xl, A) - xl
        cur = y.scale(Fraction(1, p**n)).truncate(target)
        if prev is not None and cur.equals(prev, target):
            return cur, n
        prev = cur
    raise ModuleError("log-gamma-nonconvergent")


def lift_module(M: PhiGammaModule, prec) -> PhiGammaModule:
    lift = lambda A: mat_map(A, lambda s: s.lift(prec))
    lt = M.lt
    out = PhiGammaModule(lt, M.rank, lift(M.phi), {n: lift(m) for n, m in M.gamma.items()}, M.exponents, M.label, M.window, M.radii, validate=False)
    return out


def log_gamma(M: PhiGammaModule, u: PadicScalar, x: ModuleVector, check=True, with_info=False):
    res, info = log_gamma_series(M, u, x)
    if check:
        target = max(res.prec, 1)
        lim, _ = log_gamma_limit(M, u, x, target)
        bound = min(target, lim.prec)
        if not res.equals(lim, bound):
            raise ModuleError("internal-inconsistency")
    return (res, info) if with_info else res


def _nabla_u(M: PhiGammaModule, beta: PadicScalar, n=None):
    p = M.lt.p
    v = beta.valuation()
    if isinstance(v, AtLeast):
        raise ModuleError("beta must be nonzero")
    n0 = max(0, 1 - v) if n is None else n
    tries = [n0] if n is not None else range(n0, n0 + 6)
    last = None
    for k in tries:
        gp = M._gen_prec(M.lt.work_prec) + k
        arg = beta.lift(max(beta.prec, gp)) * p**k
        u = padic_exp(arg)
        try:
            M.gamma_matrix(u)
        except DecompositionError as exc:
            last = exc
            continue
        return k, u, arg
    raise last or DecompositionError("decomposition failure")


def _lie_coords(M: PhiGammaModule, beta: PadicScalar):
    """a_i in Q with beta = sum a_i log(g_i), log(g_i) = p e_i omega**i."""
    p = M.lt.p
    coords = beta.rational_coeffs()
    return [Fraction(c) / (p * e) for c, e in zip(coords, M.exponents)]


def _derived(M: PhiGammaModule, beta: PadicScalar, x: ModuleVector, check=True):
    """Unnormalized nabla_beta x with its log-gamma info.

    Constant-diagonal modules evaluate gamma anywhere, so exp(p^n beta) is used
    directly.  Otherwise Gamma is only known on words in the generators and
    the derived action is assembled Q_p-linearly: nabla_beta = sum a_i log gamma_{g_i}.
    """
    lt = M.lt
    if M.is_constant_diagonal():
        k, u, arg = _nabla_u(M, beta)
        res, info = log_gamma(M, u, x, check=check, with_info=True)
        return res.scale(arg.inverse() * beta), info
    gp = M._gen_prec(lt.work_prec)
    total, info = None, None
    for i, a in enumerate(_lie_coords(M, beta)):
        if a == 0:
            continue
        g = M.coords.generator(i, gp)
        res, inf = log_gamma(M, g, x, check=check, with_info=True)
        term = res.scale(a)
        total = term if total is None else total + term
        info = inf if info is None or inf.slack > info.slack else info
    if total is None:
        raise ModuleError("beta must be nonzero")
    return total, info


def nabla(M: PhiGammaModule, beta, x: ModuleVector, n=None, check=True, with_info=False):
    """nabla_beta / beta, i.e. (p^n beta)^{-1} log gamma_{exp(p^n beta)}."""
    lt = M.lt
    if not isinstance(beta, PadicScalar):
        beta = PadicScalar.from_fraction(lt.p, lt.d, Fraction(beta), lt.work_prec + 8)
    if n is not None and M.is_constant_diagonal():
        k, u, arg = _nabla_u(M, beta, n)
        res, info = log_gamma(M, u, x, check=check, with_info=True)
        out = res.scale(arg.inverse())
    else:
        res, info = _derived(M, beta, x, check)
        out = res.scale(beta.inverse())
    info.slack = x.prec - out.prec
    info.prec = out.prec
    return (out, info) if with_info else out


def d_gamma(M: PhiGammaModule, beta, x: ModuleVector, n=None, check=True):
    """dGamma_beta (Z_p-linear in beta)."""
    lt = M.lt
    if not isinstance(beta, PadicScalar):
        beta = PadicScalar.from_fraction(lt.p, lt.d, Fraction(beta), lt.work_prec + 8)
    return _derived(M, beta, x, check)[0]


# ---------------------------------------------------------------------------
# analyticity


def _independent(b1: PadicScalar, b2: PadicScalar):
    c1 = b1.rational_coeffs()
    c2 = b2.rational_coeffs()
    p = b1.p
    for i in range(len(c1)):
        for j in range(i + 1, len(c1)):
            det = c1[i] * c2[j] - c1[j] * c2[i]
            if det != 0:
                from .padic import vp_fraction

                if vp_fraction(det, p) < min(b1.prec, b2.prec):
                    return True
    return False


@dataclass
class DefectResult:
    matrix: Matrix
    slack: int
    prec: int


def analytic_defect(M: PhiGammaModule, beta, beta2, check=True, linearity=True) -> DefectResult:
    """Matrix of nabla_beta - nabla_beta' on the basis, checked base-linear."""
    lt = M.lt
    if lt.d == 1:
        raise ModuleError("precondition: Lie Gamma has Z_p-rank 1, no independent pair")
    conv = lambda b: b if isinstance(b, PadicScalar) else PadicScalar.from_fraction(lt.p, lt.d, Fraction(b), lt.work_prec + 8)
    beta, beta2 = conv(beta), conv(beta2)
    if not _independent(beta, beta2):
        raise ModuleError("precondition: beta and beta' must be Z_p-independent")
    cols = []
    slack = 0
    for j in range(M.rank):
        e = M.basis_vector(j)
        a, ia = nabla(M, beta, e, check=check, with_info=True)
        b, ib = nabla(M, beta2, e, check=check, with_info=True)
        cols.append((a - b).coords)
        slack = max(slack, ia.slack, ib.slack)
    mat = [[cols[j][i] for j in range(M.rank)] for i in range(M.rank)]
    prec = mat_prec(mat)
    if linearity:
        T = fit(LaurentWindow.monomial(lt.p, lt.d, 1, lt.work_prec), M.window)
        for j in range(M.rank):
            x = M.basis_vector(j, T)
            a = nabla(M, beta, x, check=False)
            b = nabla(M, beta2, x, check=False)
            lhs = a - b
            rhs = ModuleVector([T * c for c in (cols[j])])
            if not lhs.equals(rhs, min(prec, lhs.prec)):
                raise ModuleError("defect is not base-linear at working precision")
    return DefectResult(mat, slack, prec)


def default_basis(lt, prec=None):
    prec = lt.work_prec + 8 if prec is None else prec
    gc = GroupCoordinates(lt)
    return [gc.beta(i, prec) for i in range(lt.d)]


def scalar_of(mat: Matrix):
    """c if mat == c * id with c in L at working precision, else None."""
    r = len(mat)
    c = None
    for i in range(r):
        for j in range(r):
            a = mat[i][j]
            if i != j:
                if not a.is_zero():
                    return None
                continue
            if any(n != 0 for n, _ in a.items()):
                return None
            val = a.coeff(0) if a.n_min <= 0 <= a.n_max else PadicScalar.from_int(a.p, a.deg, 0, a.prec)
            if c is None:
                c = val
            elif not c.equals(val, min(c.prec, val.prec)):
                return None
    return c


@dataclass
class AnalyticityReport:
    analytic: bool
    constants: list | None
    defects: list
    slack: int


def is_F_analytic(M: PhiGammaModule, basis=None, check=True) -> AnalyticityReport:
    lt = M.lt
    basis = default_basis(lt) if basis is None else basis
    if lt.d == 1:
        zero = PadicScalar.from_int(lt.p, lt.d, 0, lt.prec)
        return AnalyticityReport(True, [zero], [], 0)
    defects = [analytic_defect(M, basis[0], b, check=check) for b in basis[1:]]
    analytic = all(mat_is_zero(dr.matrix) for dr in defects)
    consts = [PadicScalar.from_int(lt.p, lt.d, 0, min([lt.work_prec] + [dr.prec for dr in defects]))]
    for dr in defects:
        c = scalar_of(dr.matrix)
        if c is None:
            consts = None
            break
        consts.append(c)
    slack = max([dr.slack for dr in defects], default=0)
    return AnalyticityReport(analytic, consts, defects, slack)


# ---------------------------------------------------------------------------
# twisting and extensions


def twist(M: PhiGammaModule, delta: TwistCharacter) -> PhiGammaModule:
    """M(delta): Phi scaled by delta(pi), Gamma on g_i scaled by delta(g_i).

    A character with deferred roots is applied in open-subgroup mode: the
    twisted module stores g_i = u_i**e_i instead of u_i.
    """
    lt = M.lt
    exps = [max(a, b) for a, b in zip(M.exponents, delta.exponents())]
    for a, b in zip(M.exponents, delta.exponents()):
        if max(a, b) % min(a, b):
            raise ModuleError("incompatible open subgroups")
    base = M
    if exps != list(M.exponents):
        base = restrict_to_subgroup(M, exps)
    dcoords = GroupCoordinates(lt, delta.exponents())
    gen_vals = delta.generator_values()
    new_gamma = {"zeta": mat_scale(base.gamma["zeta"], delta.at_zeta)}
    gp = base._gen_prec(lt.work_prec)
    for i in range(lt.d):
        name = f"u{i + 1}"
        g = base.coords.generator(i, gp)
        val = character_value(dcoords, delta.at_zeta, gen_vals, g)
        new_gamma[name] = mat_scale(base.gamma[name], val)
    phi = mat_scale(base.phi, delta.at_pi)
    label = f"{M.label}({delta.label})" if delta.label else M.label
    return PhiGammaModule(lt, M.rank, phi, new_gamma, exps, label, M.window, M.radii, validate=False)


def restrict_to_subgroup(M: PhiGammaModule, exps) -> PhiGammaModule:
    """Same module, with Gamma recorded on u_i**e_i only."""
    lt = M.lt
    gp = M._gen_prec(lt.work_prec)
    gam = {"zeta": M.gamma["zeta"]}
    for i, e in enumerate(exps):
        name = f"u{i + 1}"
        ratio = e // M.exponents[i]
        g = M.coords.generator(i, gp)
        gam[name] = M._power(g, M.gamma[name], ratio)[1] if ratio > 1 else M.gamma[name]
    return PhiGammaModule(lt, M.rank, M.phi, gam, exps, M.label, M.window, M.radii, validate=False)


@dataclass
class ExtData:
    """Values of (phi - 1) h~ and (gamma_g - 1) h~ as Hom(Delta, D) matrices."""

    phi: Matrix
    gamma: dict

    def to_json(self):
        return {"phi": mat_to_json(self.phi), "gamma": {n: mat_to_json(m) for n, m in self.gamma.items()}}

    @classmethod
    def from_json(cls, data):
        return cls(mat_from_json(data["phi"]), {n: mat_from_json(m) for n, m in data["gamma"].items()})

    def equals(self, other, prec=None):
        if not mat_equals(self.phi, other.phi, prec):
            return False
        return all(mat_equals(self.gamma[n], other.gamma[n], prec) for n in self.gamma)

    def is_zero(self):
        return mat_is_zero(self.phi) and all(mat_is_zero(m) for m in self.gamma.values())

    def sub(self, other):
        return ExtData(mat_sub(self.phi, other.phi), {n: mat_sub(self.gamma[n], other.gamma[n]) for n in self.gamma})


def _block(A, B, C, D):
    top = [ra + rb for ra, rb in zip(A, B)]
    bottom = [rc + rd for rc, rd in zip(C, D)]
    return top + bottom


def ext_push(Delta: PhiGammaModule, D: PhiGammaModule, data: ExtData, validate=True) -> PhiGammaModule:
    """The extension 0 -> D -> D~ -> Delta -> 0 with basis (e^D, e^Delta).

    Phi~ = [[Phi_D, C_phi Phi_Delta], [0, Phi_Delta]] and likewise for each
    stored generator.
    """
    lt = D.lt
    rD, rA = D.rank, Delta.rank
    Z = mat_zero(lt, rA, rD)
    phi = _block(D.phi, mat_mul(data.phi, Delta.phi), Z, Delta.phi)
    gam = {}
    for name in D.coords.names():
        gam[name] = _block(D.gamma[name], mat_mul(data.gamma[name], Delta.gamma[name]), Z, Delta.gamma[name])
    label = f"Ext({Delta.label},{D.label})"
    out = PhiGammaModule(lt, rD + rA, phi, gam, D.exponents, label, min(D.window, Delta.window), D.radii, validate=False)
    if validate:
        try:
            out.validate()
        except ModuleError as exc:
            raise ModuleError("cocycle consistency failure") from exc
    out.sub_rank = rD
    return out


def ext_pull(Dt: PhiGammaModule, section: Matrix, sub_rank: int | None = None) -> ExtData:
    """ExtData of D~ relative to the section e^Delta_j -> (S e_j, e^Delta_j).

    (phi - 1)s = (Phi_D phi(S) + B_phi) Phi_Delta^{-1} - S, and likewise for
    each stored generator g with g in place of phi.
    """
    rD = getattr(Dt, "sub_rank", None) if sub_rank is None else sub_rank
    if rD is None:
        raise ModuleError("declare the sub-module rank")
    lt = Dt.lt
    n = Dt.rank
    rA = n - rD

    def blocks(M):
        A = [row[:rD] for row in M[:rD]]
        B = [row[rD:] for row in M[:rD]]
        C = [row[:rD] for row in M[rD:]]
        E = [row[rD:] for row in M[rD:]]
        return A, B, C, E

    for M in [Dt.phi] + list(Dt.gamma.values()):
        if not mat_is_zero(blocks(M)[2]):
            raise ModuleError("module is not block triangular for the declared sub-module")
    if len(section) != rD or len(section[0]) != rA:
        raise ModuleError("section has the wrong shape")
    S = [[fit(s, Dt.window) for s in row] for row in section]
    A, B, _, E = blocks(Dt.phi)
    phiS = mat_map(S, lambda s: s if is_constant(s) else lt.phi_act(s))
    cphi = mat_sub(mat_mul(mat_add(mat_mul(A, phiS), B), mat_inverse(E)), S)
    cg = {}
    gp = Dt._gen_prec(lt.work_prec)
    for name in Dt.coords.names():
        g = Dt.coords.by_name(name, gp)
        A, B, _, E = blocks(Dt.gamma[name])
        gS = Dt.act_matrix(g, S)
        cg[name] = mat_sub(mat_mul(mat_add(mat_mul(A, gS), B), mat_inverse(E)), S)
    return ExtData(cphi, cg)


def coboundary(Delta: PhiGammaModule, D: PhiGammaModule, H: Matrix) -> ExtData:
    """((phi - 1)H, (g - 1)H) for a Hom(Delta, D) element with matrix H."""
    lt = D.lt
    H = [[fit(s, D.window) for s in row] for row in H]
    phiH = mat_map(H, lambda s: s if is_constant(s) else lt.phi_act(s))
    cphi = mat_sub(mat_mul(mat_mul(D.phi, phiH), mat_inverse(Delta.phi)), H)
    cg = {}
    gp = D._gen_prec(lt.work_prec)
    for name in D.coords.names():
        g = D.coords.by_name(name, gp)
        gH = D.act_matrix(g, H)
        cg[name] = mat_sub(mat_mul(mat_mul(D.gamma[name], gH), mat_inverse(Delta.gamma[name])), H)
    return ExtData(cphi, cg)


def constant_class(D: PhiGammaModule, a, c1, c2) -> ExtData:
    """A class in Ext(R, R) (also used for Delta = D of rank 1).

    phi-part the constant a, Gamma-part lambda(g) = c1 log g + c2 sigma(log g),
    an additive character of O_F^x.  It is F-analytic iff c2 = 0.
    """
    lt = D.lt
    gp = D._gen_prec(lt.work_prec)
    to_s = lambda x: x if isinstance(x, PadicScalar) else PadicScalar.from_fraction(lt.p, lt.d, Fraction(x), gp)
    a, c1, c2 = to_s(a), to_s(c1), to_s(c2)
    cg = {"zeta": [[const(lt, 0)]]}
    for i in range(lt.d):
        g = D.coords.generator(i, gp)
        lg = padic_log(g)
        lam = c1 * lg + c2 * frobenius(lg)
        cg[f"u{i + 1}"] = [[LaurentWindow.constant(lam.truncate(lt.work_prec))]]
    return ExtData([[LaurentWindow.constant(a.truncate(lt.work_prec))]], cg)


def add_ext(a: ExtData, b: ExtData) -> ExtData:
    return ExtData(mat_add(a.phi, b.phi), {n: mat_add(a.gamma[n], b.gamma[n]) for n in a.gamma})


def random_power_series_matrix(lt, rows, cols, rng, window, degree=6):
    """Random Hom elements with polynomial entries (exactly known)."""
    out = []
    for _ in range(rows):
        row = []
        for _ in range(cols):
            f = random_laurent(lt, rng, 0, degree, sparse=0.3)
            f = LaurentWindow(f.p, f.deg, f.coeffs, f.n_min, f.prec, f.shift, f.n_max, True)
            row.append(fit(f, window))
        out.append(row)
    return out


def _solve_phi(lt, a, C, free_value):
    """Power series H with a phi(H) - H = C, degree by degree.

    The factor of h_k is a p^k - 1; at most one k makes it vanish and there h_k
    is set to ``free_value``.  Returns (H, free index or None), or None if the
    equation has no solution.
    """
    W, prec = C.n_max, C.prec
    F = lt._f_powers(W)
    h, free = [], None
    for k in range(0, W + 1):
        acc = C.coeff(k)
        for j in range(1, k):
            if F[j][k]:
                acc = acc - a * h[j] * F[j][k]
        factor = a * (lt.p**k) - 1
        if factor.is_zero():
            if not acc.is_zero():
                return None
            free = k
            h.append(PadicScalar.from_int(lt.p, lt.d, free_value, prec))
            continue
        h.append(acc / factor)
    H = LaurentWindow.from_scalars(dict(enumerate(h)), 0, W, None, False, lt.p, lt.d)
    return H, free


def split_section(Delta: PhiGammaModule, D: PhiGammaModule, data: ExtData):
    """A power-series H with data = coboundary(H), or None if there is none.

    Only rank-one Hom modules are handled: the phi-equation
    chi(pi) phi(H) - H = C is solved degree by degree, a possible free
    coefficient is pinned down by a Gamma-equation, and then every
    Gamma-equation is checked.
    """
    if D.rank != 1 or Delta.rank != 1:
        raise ModuleError("split detection is implemented for rank-one Hom modules")
    lt = D.lt
    Hm = hom_module(Delta, D)
    chi_pi = Hm.phi[0][0]
    if not is_constant(chi_pi):
        raise ModuleError("split detection needs a constant Frobenius on Hom")
    a = constant_value(chi_pi)
    C = fit(data.phi[0][0], D.window)
    if C.n_min < 0 and any(any(c) for c in C.coeffs[: -C.n_min]):
        return None
    sol = _solve_phi(lt, a, C, 0)
    if sol is None:
        return None
    H, free = sol
    if free is not None:
        # H + x K runs through all solutions, K the homogeneous one
        K, _ = _solve_phi(lt, a, C * 0, 1)
        cH, cK = coboundary(Delta, D, [[H]]), coboundary(Delta, D, [[K]])
        x = None
        for name in D.coords.names():
            den = cK.gamma[name][0][0].coeff(free)
            if not den.is_zero():
                x = (data.gamma[name][0][0].coeff(free) - cH.gamma[name][0][0].coeff(free)) / den
                break
        if x is not None:
            H = H + K.scale(x)
    cob = coboundary(Delta, D, [[H]])
    bound = min(mat_prec(cob.phi), mat_prec(data.phi))
    for name in data.gamma:
        b = min(bound, mat_prec(cob.gamma[name]), mat_prec(data.gamma[name]))
        if not mat_equals(cob.gamma[name], data.gamma[name], b):
            return None
    if not mat_equals(cob.phi, data.phi, bound):
        return None
    return [[H]]

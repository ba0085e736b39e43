"""Constructive twist for modules whose defects are scalar.

If ``nabla_{beta_1} - nabla_{beta_i} = c_i`` on M, a character delta whose
Lie derivative ``l`` satisfies ``l(beta_1) = 0`` and ``l(beta_i) = c_i beta_i``
shifts each constant by ``-c_i``, so ``M(delta)`` is F-analytic.  On the
stored generator ``g = exp(p e beta)`` we put ``delta(g) = exp(l(p e beta))``;
``e`` is the least power of p making this exponential converge, and when
``e > 1`` only ``delta(g)`` itself (not its e-th root) lies in L.
"""
from __future__ import annotations

from fractions import Fraction

from .padic import AtLeast, PadicScalar, padic_exp
from .phigamma import (
    ModuleError,
    PhiGammaModule,
    TwistCharacter,
    default_basis,
    is_F_analytic,
    mat_min_valuation,
    twist,
)


class EndNotScalar(ModuleError):
    pass


def compute_constants(M: PhiGammaModule, basis=None) -> list[PadicScalar]:
    rep = is_F_analytic(M, basis)
    if rep.constants is None:
        raise EndNotScalar("End-not-scalar")
    return rep.constants


def _solve_rational(rows, rhs):
    """Solve the d x d system rows * x = rhs over Q (Gauss-Jordan)."""
    n = len(rows)
    A = [list(r) + [b] for r, b in zip(rows, rhs)]
    for c in range(n):
        piv = next(i for i in range(c, n) if A[i][c] != 0)
        A[c], A[piv] = A[piv], A[c]
        inv = 1 / A[c][c]
        A[c] = [x * inv for x in A[c]]
        for i in range(n):
            if i != c and A[i][c]:
                f = A[i][c]
                A[i] = [x - f * y for x, y in zip(A[i], A[c])]
    return [A[i][n] for i in range(n)]


def construct_twist_character(c: list, basis=None, lt=None) -> TwistCharacter:
    """delta = 1 on pi, zeta and u_1; l(beta_i) = c_i beta_i elsewhere."""
    if lt is None:
        raise ValueError("the Lubin-Tate data is needed to place the generators")
    p, d = lt.p, lt.d
    prec = min(x.prec for x in c)
    basis = default_basis(lt, prec + 8) if basis is None else basis
    if not c[0].is_zero():
        raise ValueError("c_1 must vanish")
    # l on the Z_p-basis, as elements of L
    l_basis = [ci * bi for ci, bi in zip(c, basis)]
    # coordinates of omega**j in the basis beta (exact rational representatives)
    cols = [b.rational_coeffs() for b in basis]
    rows = [[cols[k][i] for k in range(d)] for i in range(d)]
    one = PadicScalar.from_int(p, d, 1, prec)
    values, deferred = [], {}
    threshold = Fraction(1, p - 1)
    for j in range(d):
        target = [Fraction(1 if i == j else 0) for i in range(d)]
        coords = _solve_rational(rows, target)
        lj = None
        for k, x in enumerate(coords):
            if x:
                term = l_basis[k] * PadicScalar.from_fraction(p, d, x, prec + 8)
                lj = term if lj is None else lj + term
        if lj is None or lj.is_zero():
            values.append(one)
            continue
        # l(p * e * omega**j) with e = p**k
        k = 0
        while True:
            arg = lj * (p ** (k + 1))
            v = arg.valuation()
            if isinstance(v, AtLeast) or v > threshold:
                break
            k += 1
        val = padic_exp(arg)
        if k == 0:
            values.append(val)
        else:
            values.append(None)
            deferred[j] = (p**k, val)
    return TwistCharacter(p, d, one, one, values, deferred, "twist")


def _val_repr(v):
    if isinstance(v, AtLeast):
        return str(v)
    if v == float("inf"):
        return "inf"
    return int(v) if Fraction(v).denominator == 1 else str(v)


def verify_twist(M: PhiGammaModule, delta: TwistCharacter, basis=None) -> dict:
    """Defects of M(delta), the verdict, and the root obligations."""
    Mt = twist(M, delta)
    lt = M.lt
    rep = is_F_analytic(Mt, basis)
    defect_vals = []
    for dr in rep.defects:
        v = mat_min_valuation(dr.matrix)
        defect_vals.append(_val_repr(AtLeast(dr.prec)) if v == float("inf") else _val_repr(v))
    deficits = [lt.prec - int(v) for v in (mat_min_valuation(dr.matrix) for dr in rep.defects) if v != float("inf")]
    obligations = [{"generator": i + 1, "e": e, "extension_degree_bound": e} for i, (e, _) in sorted(delta.deferred.items())]
    return {
        "residual_constants": [c.to_json() for c in rep.constants] if rep.constants is not None else None,
        "character": delta.to_json(),
        "defect_valuations": defect_vals,
        "max_deficit": max(deficits) if deficits else 0,
        "slack": rep.slack,
        "verdict": "pass" if rep.analytic else "fail",
        "root_obligations": obligations,
        "open_subgroup_mode": bool(delta.deferred) or any(e != 1 for e in Mt.exponents),
    }


def twist_pipeline(M: PhiGammaModule, basis=None) -> tuple[list, TwistCharacter, dict]:
    c = compute_constants(M, basis)
    delta = construct_twist_character(c, basis, M.lt)
    report = verify_twist(M, delta, basis)
    report["constants"] = [x.to_json() for x in c]
    return c, delta, report

"""Command line front end.

    ltphigamma mult --p 3 --deg 1 --f cyclotomic --a 2 --window 5
    ltphigamma val --series "p+T" --s 1/2 --r 2
    ltphigamma twist --module frobenius-demo --json

Exit status: 0 on success (or a passing verdict), 1 on a computational
error or a failing verdict, 2 on a usage error.
"""
from __future__ import annotations

import argparse
import json
import os
import sys
from fractions import Fraction

import sympy

from . import acceptance
from .lubin_tate import LubinTateData, LubinTateError
from .padic import AtLeast, PadicScalar, PrecisionError
from .phigamma import (
    DecompositionError,
    ModuleError,
    PhiGammaModule,
    demo_module,
    is_F_analytic,
    mat_min_valuation,
    mat_to_json,
    mixed_character,
    nabla,
    rank1_from_character,
)
from .series import LaurentWindow, WindowError, v_annulus, v_box
from .twist import EndNotScalar, twist_pipeline

PREC_ENV = "LTPHIGAMMA_PREC"
# read once, at startup
ENV_PREC = os.environ.get(PREC_ENV)
VERSION = "0.1.0"

COMPUTATIONAL = (ModuleError, LubinTateError, PrecisionError, WindowError, DecompositionError, ArithmeticError, ValueError)


class UsageError(Exception):
    pass


def _default_prec():
    if ENV_PREC is None:
        return 12
    try:
        return int(ENV_PREC)
    except ValueError:
        raise UsageError(f"{PREC_ENV} must be an integer, got {ENV_PREC!r}")


# -- parsing of scalars and series -------------------------------------------
_T, _W = sympy.symbols("T w")


def _sympify(text, p):
    try:
        return sympy.expand(sympy.sympify(text.replace("^", "**"), locals={"T": _T, "w": _W, "p": sympy.Integer(p)}))
    except (sympy.SympifyError, SyntaxError, TypeError) as exc:
        raise UsageError(f"cannot parse {text!r}: {exc}")


def _coeff_scalar(expr, p, d, prec):
    """A polynomial in w with rational coefficients, as an element of L."""
    poly = sympy.Poly(expr, _W)
    out = PadicScalar.from_int(p, d, 0, prec)
    w = PadicScalar.omega(p, d, prec)
    for (j,), c in poly.terms():
        c = Fraction(int(c.p), int(c.q))
        out = out + PadicScalar.from_fraction(p, d, c, prec) * w**j
    return out


def parse_scalar(text, lt: LubinTateData, prec=None) -> PadicScalar:
    prec = lt.generator_prec() if prec is None else prec
    expr = _sympify(text, lt.p)
    if expr.has(_T):
        raise UsageError(f"{text!r} should not involve T")
    return _coeff_scalar(expr, lt.p, lt.d, prec)


def parse_series(text, lt: LubinTateData) -> LaurentWindow:
    """A Laurent polynomial in T, e.g. "p + T", "w*T^2 - 1/T"."""
    expr = _sympify(text, lt.p)
    terms = {}
    for term in sympy.Add.make_args(expr):
        c, e = term.as_coeff_exponent(_T)
        if c.has(_T) or not e.is_integer:
            raise UsageError(f"{text!r} is not a Laurent polynomial in T")
        terms[int(e)] = terms.get(int(e), 0) + c
    scalars = {n: _coeff_scalar(c, lt.p, lt.d, lt.work_prec) for n, c in terms.items() if c != 0}
    if not scalars:
        return LaurentWindow.zero(lt.p, lt.d, lt.work_prec)
    return LaurentWindow.from_scalars(scalars, None, None, lt.work_prec, True, lt.p, lt.d)


def parse_rational(text):
    try:
        return Fraction(text)
    except (ValueError, ZeroDivisionError):
        raise UsageError(f"not a rational number: {text!r}")


def load_module(spec, lt: LubinTateData) -> PhiGammaModule:
    """A demo name, mixed:a,b,k[,pi] or a path to a module JSON file."""
    if spec in ("trivial", "identity-char", "frobenius-demo"):
        return demo_module(spec, lt)
    if spec.startswith("mixed:"):
        try:
            parts = [int(x) for x in spec[6:].split(",")]
        except ValueError:
            raise UsageError(f"bad mixed character {spec!r}")
        if len(parts) not in (3, 4):
            raise UsageError("mixed:a,b,k[,pi] expected")
        return rank1_from_character(lt, mixed_character(lt, *parts))
    if os.path.exists(spec):
        with open(spec) as fh:
            return PhiGammaModule.from_json(json.load(fh), lt)
    raise UsageError(f"unknown module {spec!r}")


# -- output helpers ------------------------------------------------------------
def _val(v):
    if isinstance(v, AtLeast):
        return str(v)
    if v == float("inf"):
        return "inf"
    v = Fraction(v)
    return str(v.numerator) if v.denominator == 1 else str(v)


def _poly_str(coeffs: dict, var="T"):
    parts = []
    for n in sorted(coeffs):
        c = coeffs[n]
        mono = "" if n == 0 else (var if n == 1 else f"{var}^{n}")
        if mono and c == 1:
            parts.append(mono)
        else:
            parts.append(f"{c}*{mono}" if mono else f"{c}")
    return " + ".join(parts) if parts else "0"


# -- subcommands ---------------------------------------------------------------
def cmd_fglaw(args, lt):
    deg = args.degree
    G = lt.group_law(deg)
    ell = lt.log_coeffs(deg)
    e = lt.exp_coeffs(deg)
    result = {
        "group_law": [{"i": i, "j": j, "coeff": str(c)} for (i, j), c in sorted(G.items(), key=lambda kv: (sum(kv[0]), kv[0]))],
        "log": {str(k): str(c) for k, c in enumerate(ell) if c},
        "exp": {str(k): str(c) for k, c in enumerate(e) if c},
    }
    plain = []
    terms = []
    for (i, j), c in sorted(G.items(), key=lambda kv: (sum(kv[0]), kv[0])):
        mono = "*".join(x for x in ((f"X^{i}" if i > 1 else "X") if i else "", (f"Y^{j}" if j > 1 else "Y") if j else "") if x)
        terms.append(mono if c == 1 else f"({c})*{mono}")
    plain.append("G(X,Y) = " + " + ".join(terms) + f" + O(deg {deg + 1})")
    plain.append("log(T) = " + _poly_str({k: c for k, c in enumerate(ell) if c}))
    plain.append("exp(T) = " + _poly_str({k: c for k, c in enumerate(e) if c}))
    return result, "\n".join(plain), 0


def cmd_mult(args, lt):
    a = parse_scalar(args.a, lt)
    s = lt.mult_by(a, args.window)
    return {"a": a.to_json(), "series": s.to_json()}, f"[{args.a}](T) = {s!r}", 0


def cmd_act(args, lt):
    f = parse_series(args.series, lt)
    if args.phi:
        g = lt.phi_act(f)
        label = "phi(f)"
    else:
        if args.u is None:
            raise UsageError("act needs --u or --phi")
        u = parse_scalar(args.u, lt)
        g = lt.gamma_act(u, f.extend(args.window) if f.n_min >= 0 else f)
        label = f"gamma_{args.u}(f)"
    return {"series": g.to_json()}, f"{label} = {g!r}", 0


def cmd_val(args, lt):
    f = parse_series(args.series, lt)
    s, r = parse_rational(args.s), parse_rational(args.r)
    if not 0 < s <= r:
        raise UsageError("need 0 < s <= r")
    box = v_box(f, s, r)
    va, vb = v_annulus(f, s), v_annulus(f, r)
    result = {
        "v_box": _val(box.value),
        "lower_bound_only": box.lower_bound_only,
        "v_s": _val(va.value),
        "v_r": _val(vb.value),
    }
    return result, _val(box.value) + (" (lower bound)" if box.lower_bound_only else ""), 0


def cmd_nabla(args, lt):
    M = load_module(args.module, lt)
    beta = parse_scalar(args.beta, lt, lt.work_prec + 8)
    cols = [nabla(M, beta, M.basis_vector(j)).coords for j in range(M.rank)]
    mat = [[cols[j][i] for j in range(M.rank)] for i in range(M.rank)]
    plain = "\n".join(f"nabla e_{j + 1} = " + ", ".join(repr(c) for c in cols[j]) for j in range(M.rank))
    return {"module": M.label, "beta": beta.to_json(), "matrix": mat_to_json(mat)}, plain, 0


def cmd_analytic(args, lt):
    M = load_module(args.module, lt)
    rep = is_F_analytic(M)
    result = {
        "module": M.label,
        "analytic": rep.analytic,
        "constants": [c.to_json() for c in rep.constants] if rep.constants is not None else None,
        "defects": [{"matrix": mat_to_json(d.matrix), "min_valuation": _val(mat_min_valuation(d.matrix)), "prec": d.prec} for d in rep.defects],
        "slack": rep.slack,
    }
    lines = [f"module {M.label}: {'F-analytic' if rep.analytic else 'not F-analytic'} (slack {rep.slack})"]
    if rep.constants is not None:
        lines += [f"c_{i + 1} = {c!r}" for i, c in enumerate(rep.constants)]
    else:
        lines.append("defect is not scalar")
    return result, "\n".join(lines), 0


def cmd_twist(args, lt):
    M = load_module(args.module, lt)
    try:
        c, delta, report = twist_pipeline(M)
    except EndNotScalar:
        return {"module": M.label, "verdict": "fail", "reason": "End-not-scalar"}, "verdict: fail (End-not-scalar)", 1
    report = dict(report, module=M.label)
    lines = [f"module {M.label}", "constants: " + ", ".join(repr(x) for x in c)]
    lines.append("defect valuations: " + ", ".join(str(v) for v in report["defect_valuations"]))
    for ob in report["root_obligations"]:
        lines.append(f"root obligation: generator {ob['generator']}, e = {ob['e']}, extension degree <= {ob['extension_degree_bound']}")
    lines.append(f"verdict: {report['verdict']}")
    return report, "\n".join(lines), 0 if report["verdict"] == "pass" else 1


def cmd_selftest(args, lt):
    numbers = [int(x) for x in args.only.split(",")] if args.only else None
    results = []
    for n in numbers or sorted(acceptance.CRITERIA):
        if n not in acceptance.CRITERIA:
            raise UsageError(f"no acceptance criterion {n}")
        res = acceptance.run_criterion(n, args.seed)
        results.append(res)
        if not args.json:
            print(res.line(), flush=True)
    ok = all(r.passed for r in results)
    summary = f"{sum(r.passed for r in results)}/{len(results)} criteria passed"
    return {"results": [r.to_json() for r in results], "passed": ok}, summary, 0 if ok else 1


COMMANDS = {
    "fglaw": cmd_fglaw,
    "mult": cmd_mult,
    "act": cmd_act,
    "val": cmd_val,
    "nabla": cmd_nabla,
    "analytic": cmd_analytic,
    "twist": cmd_twist,
    "selftest": cmd_selftest,
}


def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--p", type=int, default=3)
    common.add_argument("--deg", type=int, default=None, help="degree d of F over Q_p (default 2, or 1 for cyclotomic)")
    common.add_argument("--prec-p", type=int, default=None, help=f"p-adic precision N (default ${PREC_ENV} or 12)")
    common.add_argument("--window", type=int, default=None, help="T-adic window (default 60; 20 for module commands)")
    common.add_argument("--f", default=None, help="standard | cyclotomic | coeffs:c1,c2,...")
    out = common.add_mutually_exclusive_group()
    out.add_argument("--json", action="store_true")
    out.add_argument("--plain", action="store_true")
    common.add_argument("--seed", type=int, default=0)

    parser = argparse.ArgumentParser(prog="ltphigamma", description="Lubin-Tate (phi, Gamma)-module kernel")
    sub = parser.add_subparsers(dest="command", required=True)
    sp = sub.add_parser("fglaw", parents=[common], help="formal group law, log and exp")
    sp.add_argument("--degree", type=int, default=6)
    sp = sub.add_parser("mult", parents=[common], help="the endomorphism [a](T)")
    sp.add_argument("--a", required=True)
    sp = sub.add_parser("act", parents=[common], help="gamma_u or phi on a series")
    sp.add_argument("--u")
    sp.add_argument("--phi", action="store_true")
    sp.add_argument("--series", required=True)
    sp = sub.add_parser("val", parents=[common], help="annulus valuations")
    sp.add_argument("--series", required=True)
    sp.add_argument("--s", required=True)
    sp.add_argument("--r", required=True)
    sp = sub.add_parser("nabla", parents=[common], help="nabla_beta on the basis of a module")
    sp.add_argument("--module", required=True)
    sp.add_argument("--beta", default="1")
    sp = sub.add_parser("analytic", parents=[common], help="F-analyticity defect report")
    sp.add_argument("--module", required=True)
    sp = sub.add_parser("twist", parents=[common], help="constants, twist character and verification")
    sp.add_argument("--module", required=True)
    sp = sub.add_parser("selftest", parents=[common], help="run the acceptance checks")
    sp.add_argument("--only", help="comma separated criterion numbers")
    return parser


MODULE_COMMANDS = {"nabla", "analytic", "twist"}


def _lubin_tate(args):
    f = args.f or "standard"
    d = args.deg if args.deg is not None else (1 if f == "cyclotomic" else 2)
    prec = args.prec_p if args.prec_p is not None else _default_prec()
    window = args.window if args.window is not None else (20 if args.command in MODULE_COMMANDS else 60)
    args.window = window
    if prec < 1 or window < 1 or d < 1:
        raise UsageError("precision, window and degree must be positive")
    try:
        return LubinTateData(args.p, d, f, prec=prec, window=window)
    except LubinTateError as exc:
        raise UsageError(str(exc))


def run(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        lt = _lubin_tate(args)
        result, plain, code = COMMANDS[args.command](args, lt)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return 2
    except COMPUTATIONAL as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    if args.json:
        meta = {
            "command": args.command,
            "p": lt.p,
            "deg": lt.d,
            "f": lt.f_label,
            "prec": lt.prec,
            "window": lt.window,
            "seed": args.seed,
            "env_prec": ENV_PREC,
            "version": VERSION,
        }
        print(json.dumps({"meta": meta, "result": result}, indent=2))
    else:
        print(plain)
    return code


def main():
    sys.exit(run())


if __name__ == "__main__":
    main()

# For the cyclotomic law the operator nabla on R is (1+T) log(1+T) d/dT.
# We check this against a hand computation on T itself.
from fractions import Fraction

from ltphigamma.lubin_tate import LubinTateData
from ltphigamma.padic import PadicScalar
from ltphigamma.phigamma import demo_module, fit, nabla
from ltphigamma.series import LaurentWindow

W = 12
lt = LubinTateData(3, 1, "cyclotomic", window=W)
M = demo_module("trivial", lt)
T = fit(LaurentWindow.monomial(3, 1, 1, lt.work_prec), W)
beta = PadicScalar.from_int(3, 1, 1, lt.work_prec + 8)
out = nabla(M, beta, M.vector([T])).coords[0]

# (1+T) log(1+T) = T + sum_{k>=2} (-1)^k T^k / (k (k-1))
oracle = {1: Fraction(1)}
for k in range(2, W + 1):
    oracle[k] = Fraction((-1) ** k, k * (k - 1))

prec = out.prec
print(f"nabla(T) known to 3^{prec}")
for k in range(1, 8):
    got = out.coeff(k)
    want = PadicScalar.from_fraction(3, 1, oracle[k], prec)
    print(f"  T^{k}: {str(got):>24}  oracle {oracle[k]}  {'ok' if got.equals(want, prec) else 'MISMATCH'}")

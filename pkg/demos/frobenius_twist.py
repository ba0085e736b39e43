"""Twisting a non-analytic rank-one module until it becomes analytic.

The Frobenius character sends the uniformizer to 1 and a unit u to
sigma(u)/u on the unit group.  Its module is not F-analytic: the second
defect constant comes out as 1 - omega^2.  The twist engine reads off the
constants, builds a character delta, and checks that M(delta) has no defect.
"""
from ltphigamma.lubin_tate import LubinTateData
from ltphigamma.phigamma import demo_module, is_F_analytic
from ltphigamma.twist import twist_pipeline

lt = LubinTateData(3, 2, window=20)
M = demo_module("frobenius-demo", lt)

report = is_F_analytic(M)
print("analytic before twist:", report.analytic)
for i, c in enumerate(report.constants, 1):
    print(f"  c_{i} = {c}")

c, delta, rep = twist_pipeline(M)
print("twist character values on the generators:")
for v in delta.values:
    print("  ", v)
print("verdict:", rep["verdict"])
print("defect valuations of M(delta):", [str(v) for v in rep["defect_valuations"]])

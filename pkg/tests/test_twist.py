import pytest

from ltphigamma.lubin_tate import LubinTateData
from ltphigamma.padic import PadicScalar
from ltphigamma.phigamma import PhiGammaModule, const, demo_module, trivial_character
from ltphigamma.twist import compute_constants, construct_twist_character, twist_pipeline, verify_twist

W = 20


@pytest.fixture(scope="module")
def lt():
    return LubinTateData(3, 2, window=W)


@pytest.fixture(scope="module")
def frob(lt):
    return demo_module("frobenius-demo", lt)


def test_trivial_constants_and_character(lt):
    c = compute_constants(demo_module("trivial", lt))
    assert all(x.is_zero() for x in c)
    delta = construct_twist_character(c, lt=lt)
    assert not delta.deferred
    assert all((v - 1).is_zero() for v in delta.values)


def test_frobenius_constants(lt, frob):
    c = compute_constants(frob)
    w = PadicScalar.omega(3, 2, c[1].prec)
    assert c[0].is_zero()
    assert c[1].equals(1 - w**2)
    assert c[1].valuation() == 0


def test_frobenius_pipeline_passes(frob):
    c, delta, report = twist_pipeline(frob)
    assert report["verdict"] == "pass"
    assert not delta.deferred and report["root_obligations"] == []
    assert all(PadicScalar.from_json(x).is_zero() for x in report["residual_constants"])


def test_sign_is_locked_by_vanishing(lt, frob):
    c = compute_constants(frob)
    wrong = construct_twist_character([-x for x in c], lt=lt)
    assert verify_twist(frob, wrong)["verdict"] == "fail"


def test_trivial_twist_of_frobenius_fails_with_the_scalar(lt, frob):
    report = verify_twist(frob, trivial_character(lt))
    assert report["verdict"] == "fail"
    c2 = PadicScalar.from_json(report["residual_constants"][1])
    w = PadicScalar.omega(3, 2, c2.prec)
    assert c2.equals(1 - w**2)


def test_trivial_module_trivial_twist(lt):
    report = verify_twist(demo_module("trivial", lt), trivial_character(lt))
    assert report["verdict"] == "pass"
    # zero defects print as "≥ N"
    assert all(str(v).startswith("≥") for v in report["defect_valuations"])


def test_deferred_root_in_open_subgroup_mode(lt):
    # Gamma stored on exp(p e_i omega^i) with e = (1, 3); delta0(u_2) = 1 + p
    one = const(lt, 1)
    M = PhiGammaModule(lt, 1, [[one]], {"zeta": [[one]], "u1": [[one]], "u2": [[const(lt, 4)]]}, exponents=[1, 3], window=W)
    c, delta, report = twist_pipeline(M)
    assert c[1].valuation() == -1
    assert delta.deferred[1][0] == 3
    assert report["root_obligations"] == [{"generator": 2, "e": 3, "extension_degree_bound": 3}]
    assert report["open_subgroup_mode"]
    assert report["verdict"] == "pass"

import json
import os
import subprocess
import sys

from ltphigamma.cli import run
from ltphigamma.padic import PadicScalar
from ltphigamma.phigamma import TwistCharacter
from ltphigamma.series import LaurentWindow


def call(capsys, *argv):
    code = run(list(argv))
    out = capsys.readouterr()
    return code, out.out, out.err


def test_mult_cyclotomic(capsys):
    code, out, _ = call(capsys, "mult", "--p", "3", "--deg", "1", "--f", "cyclotomic", "--a", "2", "--window", "5", "--json")
    assert code == 0
    s = LaurentWindow.from_json(json.loads(out)["result"]["series"])
    # binomial oracle: (1+T)^2 - 1
    assert [s.coeff(k).coeffs[0] for k in range(1, 6)] == [2, 1, 0, 0, 0]


def test_val_example(capsys):
    code, out, _ = call(capsys, "val", "--series", "p+T", "--s", "1/2", "--r", "2")
    assert code == 0 and out.strip() == "1/2"


def test_twist_frobenius_demo(capsys):
    code, out, _ = call(capsys, "twist", "--module", "frobenius-demo", "--json")
    assert code == 0
    data = json.loads(out)
    assert data["result"]["verdict"] == "pass"
    # the report round-trips through the serializers
    delta = TwistCharacter.from_json(data["result"]["character"])
    assert TwistCharacter.from_json(delta.to_json()).to_json() == data["result"]["character"]
    c2 = PadicScalar.from_json(data["result"]["constants"][1])
    assert not c2.is_zero()


def test_analytic_report(capsys):
    code, out, _ = call(capsys, "analytic", "--module", "frobenius-demo")
    assert code == 0 and "not F-analytic" in out


def test_usage_errors(capsys):
    assert call(capsys, "nosuch")[0] == 2
    assert call(capsys, "mult")[0] == 2
    assert call(capsys, "mult", "--a", "2", "--p", "9")[0] == 2
    assert call(capsys, "val", "--series", "T+", "--s", "1", "--r", "2")[0] == 2
    assert call(capsys, "twist", "--module", "no-such-module")[0] == 2


def test_computational_error(capsys):
    code, _, err = call(capsys, "act", "--phi", "--series", "1/T")
    assert code == 1 and "bad-substitution-target" in err


def test_fglaw_plain(capsys):
    code, out, _ = call(capsys, "fglaw", "--f", "cyclotomic", "--degree", "3")
    assert code == 0 and "X*Y" in out


def test_act_gamma(capsys):
    code, out, _ = call(capsys, "act", "--u", "2", "--series", "T", "--f", "cyclotomic", "--window", "4", "--json")
    s = LaurentWindow.from_json(json.loads(out)["result"]["series"])
    assert [s.coeff(k).coeffs[0] for k in (1, 2, 3)] == [2, 1, 0]


def test_env_precision_is_echoed():
    env = dict(os.environ, LTPHIGAMMA_PREC="9")
    out = subprocess.run([sys.executable, "-m", "ltphigamma", "mult", "--a", "2", "--json"], env=env, capture_output=True, text=True, check=True)
    meta = json.loads(out.stdout)["meta"]
    assert meta["env_prec"] == "9" and meta["prec"] == 9


def test_selftest_single_criterion(capsys):
    code, out, _ = call(capsys, "selftest", "--only", "2", "--seed", "3")
    assert code == 0 and "[PASS]" in out

"""The eleven acceptance criteria, one test each.

Each test prints a single PASS/FAIL line with the tolerance it was judged
at; the checks themselves live in ltphigamma.acceptance so that
``ltphigamma selftest`` runs exactly the same code.
"""
import pytest

from ltphigamma.acceptance import CRITERIA, run_criterion

SEED = 0


@pytest.mark.parametrize("number", sorted(CRITERIA))
def test_criterion(number, capsys):
    res = run_criterion(number, SEED)
    with capsys.disabled():
        print("\n" + res.line())
    assert res.passed, res.detail

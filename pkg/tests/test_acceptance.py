"""One test per acceptance criterion; a PASS/FAIL line per criterion is printed
in the terminal summary (see conftest.py) as well as to stdout."""

import pytest

from jointmc.acceptance import CHECKS

RESULTS = []


@pytest.mark.parametrize("check", CHECKS, ids=[c.key for c in CHECKS])
def test_criterion(check):
    result = check()
    RESULTS.append(result)
    print(result.line())
    assert result.passed, result.line()

"""One test per acceptance criterion; each prints a PASS/FAIL line.

Run with ``pytest tests/test_acceptance.py -v -s`` or directly as a script.
"""
import sys

import pytest

from margin_lab.acceptance import CRITERIA


@pytest.mark.parametrize("number", sorted(CRITERIA), ids=lambda k: f"criterion_{k}")
def test_criterion(number, capsys):
    result = CRITERIA[number]()
    with capsys.disabled():
        print("\n" + result.line())
    assert result.passed, result.detail


if __name__ == "__main__":
    failures = 0
    for k in sorted(CRITERIA):
        result = CRITERIA[k]()
        print(result.line(), flush=True)
        failures += not result.passed
    sys.exit(1 if failures else 0)

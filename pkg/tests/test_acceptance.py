"""The sixteen acceptance criteria at their stated sizes and tolerances.

Each criterion prints one ``[PASS]``/``[FAIL]`` line; the lines are also
collected into a block at the end of the pytest run.  Running this file
directly (``python tests/test_acceptance.py``) prints the same lines plus
every individual check.
"""

import sys

import pytest

from fgbm.acceptance import CRITERIA, run_criterion

MASTER_SEED = 20240611
LINES = {}


@pytest.mark.parametrize("number", sorted(CRITERIA))
def test_criterion(number):
    res = run_criterion(number, MASTER_SEED)
    LINES[number] = res.line()
    print(res.line())
    failed = [c.line() for c in res.checks if not c.passed]
    assert res.passed, "\n".join(failed)


if __name__ == "__main__":
    ok = True
    for k in sorted(CRITERIA):
        res = run_criterion(k, MASTER_SEED)
        print(res.line(), flush=True)
        for c in res.checks:
            print("    " + c.line())
        ok &= res.passed
    sys.exit(0 if ok else 1)

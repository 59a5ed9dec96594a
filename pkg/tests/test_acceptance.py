"""Acceptance suite: every criterion at its stated tolerance.

One test per criterion; each prints its pass/fail line (visible with
``pytest -s`` or in the failure report).  The same checks back the
``floqep verify`` subcommand.

Known outcomes (see README, "Verification suite"): criterion #12
requires 8 hardware threads and a measured >= 4x parallel speedup,
which a smaller machine cannot deliver; criterion #5 pins the
low-frequency EP clustering of the square-wave model at gamma = 1.00,
while the implemented model provably clusters at J/sqrt(2).  Both are
asserted faithfully rather than weakened.
"""

import time

import pytest

from floqep.verify import CRITERIA


@pytest.mark.parametrize(
    "criterion", CRITERIA, ids=[f"C{c.number:02d}-{c.title[:40]}" for c in CRITERIA]
)
def test_criterion(criterion):
    t0 = time.perf_counter()
    passed, detail = criterion.func()
    elapsed = time.perf_counter() - t0
    status = "PASS" if passed else "FAIL"
    print(f"[criterion {criterion.number:2d}] {status}  {criterion.title} "
          f"({elapsed:.1f}s)\n               {detail}")
    assert passed, f"criterion {criterion.number}: {detail}"

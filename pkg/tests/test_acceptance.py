"""Acceptance criteria A1-A6 at full resolution.

Each test prints a single ``A<n> PASS|FAIL`` summary line (visible under
``pytest -s`` or ``pytest -v``); ``python tests/test_acceptance.py`` prints
the same six lines without pytest.
"""
import sys
from functools import lru_cache

import pytest

from helicable import validation

S = validation.FULL

RUNNERS = {
    "A1": lambda: validation.check_transforms(10_000),
    "A2": lambda: validation.check_reference_loss(S["a2_h"], S["a2_min"]),
    "A3": lambda: validation.check_skin_effect(S["a3_div"], tol=S["a3_tol"]),
    "A4": lambda: validation.check_helix_factor(S["a4_h"], tol=0.01),
    "A5": lambda: validation.check_topology(S["a5_h"]),
    "A6": lambda: validation.check_structure(),
}


@lru_cache(maxsize=None)
def rows_for(name):
    return tuple(RUNNERS[name]())


def summary(name) -> str:
    rows = rows_for(name)
    ok = all(r.passed for r in rows)
    detail = "; ".join(f"{r.name.split(' ', 1)[1]}: {r.value:.6g} (ref {r.reference:.6g}, err {r.rel_error:.3g})"
                       for r in rows)
    return f"{name} {'PASS' if ok else 'FAIL'}  {detail}"


@pytest.mark.slow
@pytest.mark.parametrize("name", list(RUNNERS))
def test_criterion(name, capsys):
    line = summary(name)
    with capsys.disabled():
        print("\n" + line)
    failed = [r.line() for r in rows_for(name) if not r.passed]
    assert not failed, "\n".join(failed)


if __name__ == "__main__":
    lines = [summary(n) for n in RUNNERS]
    print("\n".join(lines))
    sys.exit(0 if all(" PASS " in ln for ln in lines) else 1)

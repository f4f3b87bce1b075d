import numpy as np
import pytest

# criterion number -> list of (clause, passed, detail)
ACCEPTANCE: dict[int, list[tuple[str, bool, str]]] = {}


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


@pytest.fixture
def criterion():
    """``criterion(k, clause, passed, detail)`` records one acceptance clause
    and prints its line; the test still has to assert."""
    def record(k: int, clause: str, passed: bool, detail: str) -> bool:
        ACCEPTANCE.setdefault(k, []).append((clause, bool(passed), detail))
        print(f"criterion {k:2d} [{clause}] {'PASS' if passed else 'FAIL'}: {detail}")
        return bool(passed)
    return record


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    tr = terminalreporter
    tr.section("acceptance criteria")
    for k in sorted(ACCEPTANCE):
        clauses = ACCEPTANCE[k]
        ok = all(p for _, p, _ in clauses)
        failed = [f"{c}: {d}" for c, p, d in clauses if not p]
        detail = "; ".join(failed) if failed else "; ".join(f"{c}: {d}" for c, _, d in clauses)
        tr.write_line(f"criterion {k:2d} {'PASS' if ok else 'FAIL'}  {detail}")

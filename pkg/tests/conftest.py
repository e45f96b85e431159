import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

ACCEPTANCE_TITLES = {
    1: "oracle equivalence (sector vs dense full space)",
    2: "SWAP-point coherence",
    3: "typical drift",
    4: "gap-ratio limits",
    5: "entropy plateau",
    6: "diffusive exponents",
    7: "regime fingerprint",
    8: "prethermal scaling",
    9: "sigma-plateau finite-size trend",
    10: "filtered Arnoldi correctness",
    11: "calibration suite",
}

# criterion -> list of (ok, detail)
_RESULTS: dict[int, list] = {}


class AcceptanceLog:
    def check(self, criterion: int, ok: bool, detail: str):
        _RESULTS.setdefault(criterion, []).append((bool(ok), detail))
        return bool(ok)


@pytest.fixture(scope="session")
def acceptance():
    return AcceptanceLog()


def pytest_terminal_summary(terminalreporter):
    if not _RESULTS:
        return
    tr = terminalreporter
    tr.section("acceptance criteria")
    for k, title in ACCEPTANCE_TITLES.items():
        checks = _RESULTS.get(k)
        if not checks:
            tr.write_line(f"criterion {k:2d} NOT RUN  {title}")
            continue
        status = "PASS" if all(ok for ok, _ in checks) else "FAIL"
        tr.write_line(f"criterion {k:2d} {status}  {title}")
        for ok, detail in checks:
            tr.write_line(f"    [{'ok' if ok else 'x '}] {detail}")

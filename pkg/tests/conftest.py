import numpy as np
import pytest

import rqa_pinn  # noqa: F401  (enables float64 before any jax use)

CRITERIA: list[str] = []


def rel_err(a, b):
    """Elementwise |a-b| / max(|a|, |b|), defined as 0 where both are exactly 0."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    denom = np.maximum(np.abs(a), np.abs(b))
    out = np.zeros(np.broadcast(a, b).shape)
    nz = denom > 0
    out[nz] = np.abs(a - b)[nz] / denom[nz]
    return out


@pytest.fixture
def report():
    def _report(number: int, passed: bool, detail: str) -> None:
        line = f"[{'PASS' if passed else 'FAIL'}] criterion {number}: {detail}"
        CRITERIA.append(line)
        print(line)

    return _report


def pytest_terminal_summary(terminalreporter):
    if CRITERIA:
        terminalreporter.section("acceptance criteria")
        for line in sorted(CRITERIA, key=lambda s: int(s.split("criterion ")[1].split(":")[0])):
            terminalreporter.write_line(line)

import numpy as np
import pytest

from morphoelastic.selftest import make_rng


@pytest.fixture
def rng():
    return make_rng(20261016)


def sample_matrices(rng, n, max_norm):
    A = rng.normal(size=(n, 3, 3))
    r = max_norm * rng.random(n) ** (1.0 / 9.0)
    return A * (r / np.linalg.norm(A, axis=(1, 2)))[:, None, None]


ACCEPTANCE_LINES = {}


def record_acceptance(number, ok, detail):
    line = f"[{'PASS' if ok else 'FAIL'}] criterion {number:2d}: {detail}"
    ACCEPTANCE_LINES[number] = line
    print(line)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for k in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(ACCEPTANCE_LINES[k])

import numpy as np
import pytest

from vflqn import data
from vflqn.he import MockBackend, PaillierBackend

TEST_KEY_BITS = 512


@pytest.fixture(scope="session")
def paillier():
    return PaillierBackend.generate(TEST_KEY_BITS)


@pytest.fixture
def mock():
    return MockBackend()


def synthetic_partition(n=10, T=500, n_a=None, seed=0, signal=2.0, train_fraction=0.8):
    X, lab, _ = data.make_synthetic(n, T, seed, signal)
    ds = data.Dataset(X, np.where(lab == 1, 1.0, -1.0), [f"x{j}" for j in range(n)])
    return data.prepare(ds, n // 2 if n_a is None else n_a, seed=seed, train_fraction=train_fraction)


@pytest.fixture
def small_part():
    return synthetic_partition(n=6, T=120, seed=4)


ACCEPTANCE_LINES: list[str] = []


@pytest.fixture
def acceptance(request):
    """Record one PASS/FAIL line for an acceptance criterion, then assert it."""

    def check(ok: bool, detail: str):
        name = request.node.name
        ACCEPTANCE_LINES.append(f"{'PASS' if ok else 'FAIL'}  {name}: {detail}")
        assert ok, detail

    def skip(reason: str):
        ACCEPTANCE_LINES.append(f"SKIP  {request.node.name}: {reason}")
        pytest.skip(reason)

    check.skip = skip
    return check


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)

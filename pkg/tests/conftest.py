import numpy as np
import pytest

from symnoise.basis import build_qbasis, sector_decompose
from symnoise.scenarios import TfimConfig, build_j_squared, tfim_hamiltonian

ACCEPTANCE_LINES = []


def record_criterion(number: int, ok: bool, detail: str) -> None:
    line = f"criterion {number:2d}: {'PASS' if ok else 'FAIL'}  {detail}"
    ACCEPTANCE_LINES.append((number, line))
    print(line)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for _, line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line)


@pytest.fixture(scope="session")
def tfim2_basis():
    h0 = tfim_hamiltonian(TfimConfig(n=2))
    return build_qbasis(sector_decompose(build_j_squared(2), refine=h0))


@pytest.fixture(scope="session")
def tfim3_basis():
    h0 = tfim_hamiltonian(TfimConfig(n=3))
    return build_qbasis(sector_decompose(build_j_squared(3), refine=h0))


@pytest.fixture
def rng():
    return np.random.default_rng(1234)

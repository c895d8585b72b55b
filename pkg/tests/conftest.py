import pytest

from mimosec.config import SeedPath, validate


@pytest.fixture
def base_raw():
    return dict(M=64, M_e=1, K=4, T=20, T_r=4, rho_r=2.25, rho_users=1.0, rho_jam=1.0)


@pytest.fixture
def cfg(base_raw):
    return validate(base_raw)


@pytest.fixture
def seed():
    return SeedPath(20240601, ("tests",))


ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)

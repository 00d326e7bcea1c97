"""Shared fixtures and the acceptance-criteria summary hook."""

import pytest

from dabsim import DabParams, PwmConfig, SolverConfig

# One line per acceptance criterion, echoed after the run so the verdicts
# are visible without -s. test_acceptance appends through criterion_report.
ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


@pytest.fixture(scope="session")
def criterion_report():
    def _report(num: int, ok: bool, detail: str) -> bool:
        line = f"[{'PASS' if ok else 'FAIL'}] criterion {num}: {detail}"
        ACCEPTANCE_LINES.append(line)
        print(line)
        return ok

    return _report


@pytest.fixture
def ref_design():
    """Rated converter: 650 V, 1:1, 22 uH, 120 uF, 32 kHz, no load."""
    return DabParams()


@pytest.fixture
def pwm():
    """Nominal modulator: 32 kHz carriers on a 100 MHz clock, D = 0."""
    return PwmConfig()


@pytest.fixture
def solver_cfg():
    return SolverConfig()

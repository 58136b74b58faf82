import pytest

from gwldp import kernels

ACCEPTANCE_LINES: list[str] = []


def record(criterion: int, name: str, passed: bool, detail: str) -> None:
    """Store one pass/fail line for the acceptance summary."""
    line = f"[{'PASS' if passed else 'FAIL'}] criterion {criterion:2d} {name}: {detail}"
    ACCEPTANCE_LINES.append(line)
    print(line)


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[2])):
        terminalreporter.write_line(line)


@pytest.fixture(params=["compiled", "python"])
def backend(request):
    if request.param == "compiled" and kernels.compiled is None:
        pytest.skip("compiled kernels are not built")
    return request.param

import pytest
from hypothesis import HealthCheck, settings

# Kernel JIT can make the first test that touches it blow any deadline;
# disable per-example deadlines globally and keep example counts moderate.
settings.register_profile(
    "default",
    deadline=None,
    max_examples=100,
    suppress_health_check=[HealthCheck.too_slow],
)
settings.load_profile("default")


@pytest.fixture(scope="session", autouse=True)
def warm_kernels():
    """Compile the numba kernels once so timed tests measure steady state."""
    from triweight import _kernels

    _kernels.warmup()


# Verdict lines from the acceptance tests, echoed at the end of the run so
# they stay visible even when pytest swallows passing tests' stdout.
_criterion_lines: list[str] = []


def record_criterion(ok: bool, line: str) -> bool:
    full = f"{'[PASS]' if ok else '[FAIL]'} {line}"
    _criterion_lines.append(full)
    print(full)
    return ok


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if _criterion_lines:
        terminalreporter.section("acceptance criteria")
        for line in _criterion_lines:
            terminalreporter.write_line(line)

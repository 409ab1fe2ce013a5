import numpy as np
import pytest

from ggdenoise import composite_scene

_ACCEPTANCE_RESULTS = {}
_ACCEPTANCE_DETAILS = {}


def record_criterion(name: str, detail: str) -> None:
    """Stash a human-readable summary for the acceptance report."""
    _ACCEPTANCE_DETAILS[name] = detail


@pytest.fixture(scope="session")
def scene16():
    return composite_scene(16, seed=3)


@pytest.fixture(scope="session")
def scene32():
    return composite_scene(32, seed=5)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    if report.when == "call" and item.name.startswith("test_criterion"):
        _ACCEPTANCE_RESULTS[item.name] = report.outcome


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE_RESULTS:
        return
    terminalreporter.write_sep("-", "acceptance criteria")
    for name in sorted(_ACCEPTANCE_RESULTS):
        status = "PASS" if _ACCEPTANCE_RESULTS[name] == "passed" else "FAIL"
        detail = _ACCEPTANCE_DETAILS.get(name, "")
        suffix = f" ({detail})" if detail else ""
        terminalreporter.write_line(f"{name}: {status}{suffix}")

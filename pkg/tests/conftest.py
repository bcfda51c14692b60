import numpy as np
import pytest
from hypothesis import settings

from twinsync import two_system_example

settings.register_profile("default", max_examples=60, deadline=None)
settings.load_profile("default")

Q1 = np.array([[-1.0, 1.0], [2.0, -2.0]])
Q2 = np.array([[-3.0, 3.0], [6.0, -6.0]])


@pytest.fixture
def example():
    return two_system_example()


def two_state_oracle(a: float, b: float, tau: float) -> np.ndarray:
    """Closed-form e^{Q tau} for Q = [[-a, a], [b, -b]] via its eigendecomposition."""
    s = a + b
    e = np.exp(-s * tau)
    return np.array([[b + a * e, a - a * e], [b - b * e, a + b * e]]) / s


_CRITERIA = {}


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    mark = item.get_closest_marker("criterion")
    if mark is None:
        return
    num, text = mark.args
    if rep.when == "call" or (rep.when == "setup" and not rep.passed):
        detail = getattr(item, "criterion_detail", "")
        _CRITERIA[num] = ("PASS" if rep.passed else "FAIL", text, detail)


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for num in sorted(_CRITERIA):
        status, text, detail = _CRITERIA[num]
        line = f"criterion {num}: {status}  {text}"
        terminalreporter.write_line(line + (f"  [{detail}]" if detail else ""))

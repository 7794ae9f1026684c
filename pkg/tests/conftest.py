import numpy as np
import pytest

from flicker_ews.neuralnet import NetworkConfig, NetworkModel

_criteria: list[tuple[str, str, str]] = []


def pytest_runtest_logreport(report):
    if report.when != "call" and not (report.when == "setup" and report.outcome != "passed"):
        return
    if "test_acceptance.py" not in report.nodeid:
        return
    name = report.nodeid.split("::")[-1]
    detail = ""
    for key, value in report.user_properties:
        if key == "detail":
            detail = value
    _criteria.append((name, report.outcome, detail))


def pytest_terminal_summary(terminalreporter):
    if not _criteria:
        return
    terminalreporter.section("acceptance criteria")
    for name, outcome, detail in _criteria:
        mark = {"passed": "PASS", "failed": "FAIL", "skipped": "SKIP"}.get(outcome, outcome.upper())
        terminalreporter.write_line(f"{mark:4s}  {name}  {detail}")


TINY = NetworkConfig(input_length=64, kernel_size=5, conv_filters=(4, 8), lstm_units=(6, 3), dropout=0.0)


@pytest.fixture
def tiny_config():
    return TINY


@pytest.fixture
def tiny_model():
    return NetworkModel.initialize(TINY, seed=3, dtype=np.float64)

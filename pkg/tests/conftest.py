"""Shared fixtures and the per-criterion summary for the acceptance suite."""

import re
from collections import OrderedDict

import pytest

from cowqkd.params import ProtocolParams

_CRITERIA: "OrderedDict[int, list]" = OrderedDict()
_PATTERN = re.compile(r"test_acceptance\.py::test_c(\d+)_(\w+)")


@pytest.fixture
def fiber_link():
    """Link parameters of the standard distance plots."""
    return ProtocolParams(eta=0.1, alpha_att=0.25, f=0.1, tB=0.99)


def pytest_runtest_logreport(report):
    m = _PATTERN.search(report.nodeid)
    if not m:
        return
    if report.when == "call" or (report.when == "setup" and report.outcome != "passed"):
        _CRITERIA.setdefault(int(m.group(1)), []).append((m.group(2), report.outcome))


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for num in sorted(_CRITERIA):
        results = _CRITERIA[num]
        ok = all(outcome == "passed" for _, outcome in results)
        parts = ", ".join(f"{name}={outcome}" for name, outcome in results)
        terminalreporter.write_line(f"criterion {num:2d}: {'PASS' if ok else 'FAIL'}  ({parts})")

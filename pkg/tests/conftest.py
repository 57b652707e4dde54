import numpy as np
import pytest

from spikenorm.plasticity import PlasticityGenome
from spikenorm.topology import WeightState, build_topology


@pytest.fixture
def pair_topology():
    """One excitatory presynaptic neuron feeding one postsynaptic neuron."""
    return build_topology([1, 1], 1.0, 0)


@pytest.fixture
def genome():
    return PlasticityGenome(ltp=0.1, inh_ltp=0.05, ltd=0.1, discharge=0.06)


@pytest.fixture
def unit_weight():
    return WeightState([np.ones((1, 1))])


# --- acceptance report ----------------------------------------------------------
# Tests marked ``criterion(number, text)`` are collected into one pass/fail line
# per criterion at the end of the run.

_criteria: dict[str, dict] = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(number, text): acceptance criterion checked by this test")


def pytest_collection_modifyitems(items):
    for item in items:
        mark = item.get_closest_marker("criterion")
        if mark:
            number, text = mark.args
            _criteria.setdefault(item.nodeid, {"number": number, "text": text, "outcome": "not run"})


def pytest_runtest_logreport(report):
    entry = _criteria.get(report.nodeid)
    if entry is None:
        return
    if report.failed:
        entry["outcome"] = "FAIL"
    elif report.when == "call" and report.passed and entry["outcome"] != "FAIL":
        entry["outcome"] = "PASS"
    elif report.skipped:
        entry["outcome"] = "SKIP"


def pytest_terminal_summary(terminalreporter):
    if not _criteria:
        return
    terminalreporter.section("acceptance criteria")
    grouped: dict[int, list[dict]] = {}
    for entry in _criteria.values():
        grouped.setdefault(int(entry["number"]), []).append(entry)
    for number in sorted(grouped):
        outcomes = {e["outcome"] for e in grouped[number]}
        outcome = next((o for o in ("FAIL", "not run", "SKIP") if o in outcomes), "PASS")
        terminalreporter.write_line(f"criterion {number}: {outcome:7s} {grouped[number][0]['text']}")

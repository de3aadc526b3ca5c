import numpy as np
import pytest

from oodgauge.harness.config import ExperimentConfig


def pytest_addoption(parser):
    parser.addoption("--quick", action="store_true",
                     help="skip full-protocol tests marked slow")


def pytest_collection_modifyitems(config, items):
    if not config.getoption("--quick"):
        return
    skip = pytest.mark.skip(reason="--quick")
    for item in items:
        if "slow" in item.keywords:
            item.add_marker(skip)


@pytest.fixture
def np_rng():
    return np.random.default_rng(12345)


@pytest.fixture
def tiny_config():
    # ~1/40 of the protocol; trains in well under a second
    return ExperimentConfig(scale=40, epochs=3)


ACCEPTANCE_KEY = pytest.StashKey[list]()


@pytest.fixture
def acceptance_report(request):
    """Collect one PASS/FAIL line per acceptance criterion for the terminal summary."""
    lines = request.config.stash.setdefault(ACCEPTANCE_KEY, [])

    def report(name, ok, detail):
        line = f"[{'PASS' if ok else 'FAIL'}] {name}: {detail}"
        lines.append(line)
        print(line)
        return ok

    return report


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    lines = config.stash.get(ACCEPTANCE_KEY, [])
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in lines:
            terminalreporter.write_line(line)

import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from slidealign.event_log import Trace
from slidealign.petri_net import Marking, loop_fixture
from slidealign.sliding_window import prepare_model

ACCEPTANCE_LINES: list[str] = []

WALKTHROUGH = tuple("ABDCCECCE")


@pytest.fixture
def loop_net():
    return loop_fixture()


@pytest.fixture
def loop_model(loop_net):
    return prepare_model(loop_net)


@pytest.fixture
def walk_trace():
    return Trace("walkthrough", WALKTHROUGH)


def mk(*places):
    return Marking.of(places)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)

import os
import sys

import pytest

sys.path.insert(0, os.path.dirname(__file__))

_CRITERIA = pytest.StashKey[list]()


def record_criterion(config, line):
    config.stash.setdefault(_CRITERIA, []).append(line)


def pytest_terminal_summary(terminalreporter, config):
    lines = config.stash.get(_CRITERIA, [])
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in sorted(lines):
            terminalreporter.write_line(line)

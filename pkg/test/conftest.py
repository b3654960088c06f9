"""
Shared pytest configuration.

Long running statistical checks are marked ``slow`` and only run with ``--runslow``.

:author: Athanasios Anastasiou
:date: Oct 2026
"""

import pytest


def pytest_addoption(parser):
    parser.addoption("--runslow", action="store_true", default=False, help="run the slow statistical checks")


def pytest_collection_modifyitems(config, items):
    if config.getoption("--runslow"):
        return
    skip_slow = pytest.mark.skip(reason="needs --runslow")
    for item in items:
        if "slow" in item.keywords:
            item.add_marker(skip_slow)
